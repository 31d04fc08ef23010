use std::path::Path;

use tvvar::series::fmt_num;
use tvvar::TvvarError;

/// Tabular output written as CSV; numbers use 17 significant digits.
#[derive(Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn save(&self, path: &Path) -> Result<(), TvvarError> {
        let mut wtr = csv::Writer::from_path(path).map_err(|e| TvvarError::Io(format!("{}: {e}", path.display())))?;
        wtr.write_record(&self.header)?;
        for row in &self.rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
        log::info!("wrote {} ({} rows)", path.display(), self.rows.len());
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    fmt_num(x)
}

pub fn nums(xs: impl IntoIterator<Item = f64>) -> impl Iterator<Item = String> {
    xs.into_iter().map(fmt_num)
}
