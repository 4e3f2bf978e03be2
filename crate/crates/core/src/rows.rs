use crate::{Error, Result};

/// Dense row-major matrix of samples, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    data: Vec<f64>,
    width: usize,
}

impl Rows {
    pub fn new(data: Vec<f64>, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::Data("row width must be at least 1".into()));
        }
        if !data.len().is_multiple_of(width) {
            return Err(Error::Dimension { expected: width, got: data.len() % width });
        }
        Ok(Rows { data, width })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let width = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            let r = r.as_ref();
            if r.len() != width {
                return Err(Error::Dimension { expected: width, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        if rows.is_empty() {
            return Ok(Rows { data, width: 1 });
        }
        Rows::new(data, width)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.width)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows `[start, end)` as a new matrix.
    pub fn slice(&self, start: usize, end: usize) -> Rows {
        Rows { data: self.data[start * self.width..end * self.width].to_vec(), width: self.width }
    }

    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Rows> {
        let out: Vec<Vec<f64>> = self.iter().map(f).collect();
        if out.is_empty() {
            return Ok(Rows { data: Vec::new(), width: self.width });
        }
        Rows::from_rows(&out)
    }
}
