//! CSV serialisation of lattice fields: one row per node, coordinates first.

use std::io::{Read, Write};

use super::{Field, FieldShape, Grid};
use crate::error::{Error, Result};

const AXES: [&str; 2] = ["x", "y"];

fn component_names(grid: &Grid, shape: FieldShape) -> Vec<String> {
    match shape {
        FieldShape::Scalar => vec!["value".into()],
        FieldShape::Vector => (0..grid.components()).map(|k| format!("u{k}")).collect(),
        FieldShape::Matrix => (0..grid.components())
            .flat_map(|k| (0..grid.dim()).map(move |l| format!("a{k}{l}")))
            .collect(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv: {other:?}")),
    }
}

impl Field {
    /// Header row: coordinate names followed by component names.
    pub fn csv_header(&self) -> Vec<String> {
        let mut header: Vec<String> = AXES[..self.grid.dim()].iter().map(|s| s.to_string()).collect();
        header.extend(component_names(&self.grid, self.shape));
        header
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.csv_header()).map_err(csv_error)?;
        let d = self.grid.dim();
        let mut row = Vec::with_capacity(d + self.ncomp());
        for p in 0..self.grid.num_points() {
            row.clear();
            let x = self.grid.position(p);
            row.extend(x[..d].iter().map(|v| format!("{v:.12e}")));
            row.extend((0..self.ncomp()).map(|c| format!("{:.12e}", self.at(p, c))));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a field written by [`Field::write_csv`] back onto `grid`.
    pub fn read_csv<R: Read>(grid: &Grid, shape: FieldShape, reader: R) -> Result<Field> {
        let mut r = csv::Reader::from_reader(reader);
        let expected = Field::zeros(grid, shape).csv_header();
        let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
        if header != expected {
            return Err(Error::ShapeMismatch(format!(
                "csv header {header:?}, expected {expected:?}"
            )));
        }
        let d = grid.dim();
        let nc = grid.ncomp(shape);
        let np = grid.num_points();
        let mut data = vec![0.0; nc * np];
        let mut rows = 0;
        for (p, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            if p >= np {
                return Err(Error::ShapeMismatch(format!("more than {np} rows")));
            }
            for c in 0..nc {
                let raw = rec.get(d + c).unwrap_or_default();
                data[c * np + p] = raw.trim().parse().map_err(|_| {
                    Error::InvalidParameter(format!("row {}: `{raw}` is not a number", p + 2))
                })?;
            }
            rows += 1;
        }
        if rows != np {
            return Err(Error::ShapeMismatch(format!("{rows} rows, expected {np}")));
        }
        Field::from_values(grid, shape, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn roundtrip_preserves_values() {
        let g = make_grid(2, 2, 4).unwrap();
        let f = Field::from_fn(&g, FieldShape::Vector, |x, o| {
            o[0] = (std::f64::consts::PI * x[0]).sin() * x[1] * (1.0 - x[1]);
            o[1] = -0.125 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
        })
        .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,u0,u1\n"));
        assert_eq!(text.lines().count(), 1 + g.num_points());
        let back = Field::read_csv(&g, FieldShape::Vector, buf.as_slice()).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let g = make_grid(1, 2, 3).unwrap();
        let text = "x,u0\n0.25,0\n0.5,0\n0.75,0\n";
        assert!(Field::read_csv(&g, FieldShape::Vector, text.as_bytes()).is_err());
    }
}
