//! Versioned text checkpoints.
//!
//! Layout: a version line, the layer widths, both activation names, then for
//! each layer its weight matrix (row-major, one row per line) and bias vector
//! as decimal floats. Values are written in Rust's shortest round-trip float
//! form, so a save/load cycle reproduces parameters bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::{MlpModel, OutputActivation};
use crate::error::{Error, Result};

const FORMAT_VERSION: &str = "robustnet-mlp-v1";

impl MlpModel {
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.checkpoint_text()?)?;
        Ok(())
    }

    pub fn checkpoint_text(&self) -> Result<String> {
        for (l, w) in self.weights().iter().enumerate() {
            if w.iter().chain(self.biases()[l].iter()).any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "refusing to checkpoint non-finite parameters (layer {l})"
                )));
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_VERSION}");
        let dims: Vec<String> = self.layer_dims().iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "layer_dims {}", dims.join(" "));
        let _ = writeln!(out, "hidden_activation relu");
        let _ = writeln!(out, "output_activation {}", self.output_activation().name());
        for (l, (w, b)) in self.weights().iter().zip(self.biases()).enumerate() {
            let _ = writeln!(out, "weights {} {} {}", l, w.nrows(), w.ncols());
            for row in w.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
            let _ = writeln!(out, "biases {} {}", l, b.len());
            let line: Vec<String> = b.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        let _ = writeln!(out, "end");
        Ok(out)
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint_text(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn from_checkpoint_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let version = lines
            .next()
            .ok_or_else(|| Error::Format("empty checkpoint".into()))?;
        if version.trim() != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version:?} (expected {FORMAT_VERSION})"
            )));
        }

        // Token stream over the remainder; shape headers impose structure.
        let rest: Vec<&str> = lines.collect();
        let mut tokens = rest.iter().flat_map(|l| l.split_whitespace());
        let mut next = |what: &str| -> Result<&str> {
            tokens
                .next()
                .ok_or_else(|| Error::Format(format!("truncated checkpoint: expected {what}")))
        };

        fn expect(tok: &str, want: &str) -> Result<()> {
            if tok != want {
                return Err(Error::Format(format!(
                    "malformed checkpoint: expected {want:?}, found {tok:?}"
                )));
            }
            Ok(())
        }
        fn parse_usize(tok: &str, what: &str) -> Result<usize> {
            tok.parse()
                .map_err(|_| Error::Format(format!("bad {what}: {tok:?}")))
        }
        fn parse_f64(tok: &str) -> Result<f64> {
            tok.parse()
                .map_err(|_| Error::Format(format!("bad float: {tok:?}")))
        }

        expect(next("layer_dims")?, "layer_dims")?;
        let mut dims = Vec::new();
        let mut tok = next("layer width")?;
        while let Ok(d) = tok.parse::<usize>() {
            dims.push(d);
            tok = next("layer width or hidden_activation")?;
        }
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Format(format!("invalid layer_dims {dims:?}")));
        }
        expect(tok, "hidden_activation")?;
        expect(next("hidden activation name")?, "relu")?;
        expect(next("output_activation")?, "output_activation")?;
        let output_activation = OutputActivation::parse(next("output activation name")?)?;

        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            expect(next("weights header")?, "weights")?;
            let idx = parse_usize(next("layer index")?, "layer index")?;
            let rows = parse_usize(next("row count")?, "row count")?;
            let cols = parse_usize(next("col count")?, "col count")?;
            if idx != l || rows != dims[l + 1] || cols != dims[l] {
                return Err(Error::Format(format!(
                    "weights {idx} shaped {rows}x{cols} does not chain with layer_dims {dims:?}"
                )));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(parse_f64(next("weight value")?)?);
            }
            weights.push(
                ndarray::Array2::from_shape_vec((rows, cols), data)
                    .map_err(|e| Error::Format(e.to_string()))?,
            );

            expect(next("biases header")?, "biases")?;
            let idx = parse_usize(next("layer index")?, "layer index")?;
            let len = parse_usize(next("bias length")?, "bias length")?;
            if idx != l || len != dims[l + 1] {
                return Err(Error::Format(format!(
                    "biases {idx} of length {len} does not chain with layer_dims {dims:?}"
                )));
            }
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(parse_f64(next("bias value")?)?);
            }
            biases.push(ndarray::Array1::from_vec(data));
        }
        expect(next("end marker")?, "end")?;

        Ok(MlpModel {
            layer_dims: dims,
            weights,
            biases,
            output_activation,
            opt_state: None,
        })
    }
}
