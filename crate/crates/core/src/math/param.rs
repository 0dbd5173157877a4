use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named contiguous slice of a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Flat parameter vector made of named segments laid out back to back.
///
/// A VAE stores its decoder segment first and its encoder segment second, so
/// the whole model is the single vector that evolution strategies perturb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<Segment>,
}

impl ParamVector {
    /// Zero-initialised vector with one segment per `(name, len)` pair.
    pub fn zeros(segments: &[(&str, usize)]) -> Result<Self> {
        let mut layout = Vec::with_capacity(segments.len());
        let mut offset = 0;
        for &(name, len) in segments {
            if layout.iter().any(|s: &Segment| s.name == name) {
                return Err(Error::InvalidConfig(format!("duplicate segment `{name}`")));
            }
            layout.push(Segment {
                name: name.to_string(),
                offset,
                len,
            });
            offset += len;
        }
        if offset == 0 {
            return Err(Error::InvalidDimension("parameter vector has length 0".into()));
        }
        Ok(Self {
            values: vec![0.0; offset],
            layout,
        })
    }

    /// Concatenates the given segment contents (the inverse of [`ParamVector::split`]).
    pub fn flatten(segments: &[(&str, Vec<f64>)]) -> Result<Self> {
        let shape: Vec<(&str, usize)> = segments.iter().map(|(n, v)| (*n, v.len())).collect();
        let mut pv = Self::zeros(&shape)?;
        for (name, v) in segments {
            pv.segment_mut(name)?.copy_from_slice(v);
        }
        Ok(pv)
    }

    /// Copies every segment out, in layout order.
    pub fn split(&self) -> Vec<(String, Vec<f64>)> {
        self.layout
            .iter()
            .map(|s| (s.name.clone(), self.values[s.range()].to_vec()))
            .collect()
    }

    /// Replaces all values, keeping the layout.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                context: "ParamVector::with_values",
                expected: self.values.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            layout: self.layout.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &[Segment] {
        &self.layout
    }

    pub fn find(&self, name: &str) -> Result<&Segment> {
        self.layout
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::InvalidConfig(format!("no segment named `{name}`")))
    }

    pub fn segment(&self, name: &str) -> Result<&[f64]> {
        let r = self.find(name)?.range();
        Ok(&self.values[r])
    }

    pub fn segment_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        let r = self.find(name)?.range();
        Ok(&mut self.values[r])
    }

    /// Checks the layout against the value buffer.
    pub fn check(&self) -> Result<()> {
        let mut offset = 0;
        for s in &self.layout {
            if s.offset != offset {
                return Err(Error::CorruptFile(format!("segment `{}` is not contiguous", s.name)));
            }
            offset += s.len;
        }
        if offset != self.values.len() {
            return Err(Error::DimensionMismatch {
                context: "ParamVector layout",
                expected: offset,
                got: self.values.len(),
            });
        }
        Ok(())
    }
}
