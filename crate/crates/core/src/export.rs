//! CSV artifacts and plot-ready two-column series.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::forms::QuadraticForm;
use crate::geometry::GasketGraph;

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// `index, a_1, ..., a_N, denominator` per vertex.
pub fn write_vertices(path: &Path, graph: &GasketGraph) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["index".to_string()];
    header.extend((1..=graph.dimension()).map(|j| format!("a_{j}")));
    header.push("denominator".into());
    w.write_record(&header)?;
    for (i, key) in graph.vertices().iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(key.coords().iter().map(u128::to_string));
        row.push(graph.denominator().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `index, word, v_0, ..., v_N` per cell.
pub fn write_cells(path: &Path, graph: &GasketGraph) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["index".to_string(), "word".to_string()];
    header.extend((0..=graph.dimension()).map(|j| format!("v_{j}")));
    w.write_record(&header)?;
    for (i, cell) in graph.cells().iter().enumerate() {
        let mut row = vec![i.to_string(), cell.word.to_string()];
        row.extend(cell.vertices.iter().map(usize::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `u, v, multiplicity` per edge.
pub fn write_edges(path: &Path, graph: &GasketGraph) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["u", "v", "multiplicity"])?;
    for e in graph.edges() {
        w.write_record([e.u.to_string(), e.v.to_string(), e.multiplicity.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `index, value`; used for solutions and vertex or cell measures.
pub fn write_vector(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["index", name])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// `row, col, value` for the nonzero entries of the form matrix.
pub fn write_form(path: &Path, form: &QuadraticForm<f64>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["row", "col", "value"])?;
    for (i, j, v) in form.to_coo() {
        w.write_record([i.to_string(), j.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// A two-column series with axis labels and the expected shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSeries {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    /// Plain-text description such as "log-log slope 2.3219".
    pub expected: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub x_label: String,
    pub y_label: String,
    pub expected: String,
    pub rows: usize,
}

/// Writes `<name>.dat` per series into `dir`, whitespace separated with a
/// commented header, and returns the manifest entries.
pub fn emit_plot_data(dir: &Path, series: &[PlotSeries]) -> Result<Vec<ManifestEntry>> {
    fs::create_dir_all(dir)?;
    series
        .iter()
        .map(|s| {
            let file = format!("{}.dat", s.name);
            let mut text = format!("# {} {}\n", s.x_label, s.y_label);
            for (x, y) in &s.points {
                text.push_str(&format!("{x:e} {y:e}\n"));
            }
            fs::write(dir.join(&file), text)?;
            Ok(ManifestEntry {
                file,
                x_label: s.x_label.clone(),
                y_label: s.y_label.clone(),
                expected: s.expected.clone(),
                rows: s.points.len(),
            })
        })
        .collect()
}

/// Paths of the standard geometry artifacts under `dir`.
pub fn write_geometry(dir: &Path, graph: &GasketGraph) -> Result<Vec<PathBuf>> {
    let paths = vec![dir.join("vertices.csv"), dir.join("cells.csv"), dir.join("edges.csv")];
    write_vertices(&paths[0], graph)?;
    write_cells(&paths[1], graph)?;
    write_edges(&paths[2], graph)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GasketModel;

    #[test]
    fn geometry_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = GasketModel::constant(2, 2, 2).unwrap();
        let paths = write_geometry(dir.path(), &m.graph).unwrap();
        let mut r = csv::Reader::from_path(&paths[0]).unwrap();
        assert_eq!(r.headers().unwrap().len(), 4);
        assert_eq!(r.records().count(), m.graph.vertex_count());
        let mut r = csv::Reader::from_path(&paths[1]).unwrap();
        assert_eq!(r.records().count(), m.graph.cell_count());
        write_form(&dir.path().join("form.csv"), &m.form).unwrap();
        let mut r = csv::Reader::from_path(dir.path().join("form.csv")).unwrap();
        let total: f64 = r
            .records()
            .map(|rec| rec.unwrap()[2].parse::<f64>().unwrap())
            .sum();
        assert!(total.abs() < 1e-9);
    }

    #[test]
    fn plot_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = PlotSeries {
            name: "psi".into(),
            x_label: "r".into(),
            y_label: "Psi(r)".into(),
            expected: "log-log slope 2".into(),
            points: vec![(1.0, 1.0), (2.0, 4.0)],
        };
        let m = emit_plot_data(dir.path(), &[s]).unwrap();
        assert_eq!(m[0].rows, 2);
        let text = fs::read_to_string(dir.path().join("psi.dat")).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
