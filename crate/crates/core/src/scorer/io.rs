//! Model and training-set files.
//!
//! `FRM1`: `u32 n_layers, u64 hidden, u64 input`, output layout header,
//! `f64 lr, u64 batch, u64 epochs, u64 seed`, then per layer
//! `u64 n_in, u64 n_out`, weights row-major, biases.
//!
//! `FRX1`: `u64 input_size`, target layout header, `u64 N`, then
//! `N x {input f64s, target cells f64s}`.

use std::io::{Read, Write};

use super::{Layer, MlpConfig, MlpParams, Result, ScorerError, TrainingExample};
use crate::codec::*;
use crate::sketch::io::{read_layout_key, write_layout_key};
use crate::sketch::{Sketch, SketchKind};

const MODEL_MAGIC: &[u8; 4] = b"FRM1";
const EXAMPLES_MAGIC: &[u8; 4] = b"FRX1";

pub fn write_model<W: Write>(config: &MlpConfig, params: &MlpParams, mut w: W) -> Result<()> {
    write_magic(&mut w, MODEL_MAGIC)?;
    write_u32(&mut w, config.n_layers as u32)?;
    write_u64(&mut w, config.hidden_size as u64)?;
    write_u64(&mut w, config.input_size as u64)?;
    write_layout_key(&mut w, &config.output)?;
    write_f64(&mut w, config.learning_rate)?;
    write_u64(&mut w, config.batch_size as u64)?;
    write_u64(&mut w, config.epochs as u64)?;
    write_u64(&mut w, config.seed)?;
    for l in &params.layers {
        write_u64(&mut w, l.n_in as u64)?;
        write_u64(&mut w, l.n_out as u64)?;
        write_f64s(&mut w, &l.weights)?;
        write_f64s(&mut w, &l.bias)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<(MlpConfig, MlpParams)> {
    read_magic(&mut r, MODEL_MAGIC)?;
    let n_layers = read_u32(&mut r)? as usize;
    let hidden_size = read_len(&mut r, "hidden")?;
    let input_size = read_len(&mut r, "input")?;
    let output = read_layout_key(&mut r)?;
    let learning_rate = read_f64(&mut r)?;
    let batch_size = read_len(&mut r, "batch")?;
    let epochs = read_len(&mut r, "epochs")?;
    let seed = read_u64(&mut r)?;
    let config = MlpConfig {
        n_layers,
        hidden_size,
        input_size,
        output,
        learning_rate,
        batch_size,
        epochs,
        seed,
    };
    config.validate()?;
    let sizes = config.layer_sizes();
    let mut layers = Vec::with_capacity(n_layers);
    for w in sizes.windows(2) {
        let n_in = read_len(&mut r, "layer input")?;
        let n_out = read_len(&mut r, "layer output")?;
        if (n_in, n_out) != (w[0], w[1]) {
            return Err(FormatError::Corrupt(format!(
                "layer {n_in}x{n_out}, expected {}x{}",
                w[0], w[1]
            ))
            .into());
        }
        let weights = read_f64s(&mut r, n_in * n_out)?;
        let bias = read_f64s(&mut r, n_out)?;
        layers.push(Layer {
            n_in,
            n_out,
            weights,
            bias,
        });
    }
    Ok((config, MlpParams { output, layers }))
}

pub fn write_examples<W: Write>(examples: &[TrainingExample], mut w: W) -> Result<()> {
    let Some(first) = examples.first() else {
        return Err(ScorerError::EmptyDataset);
    };
    let key = first.target().key();
    write_magic(&mut w, EXAMPLES_MAGIC)?;
    write_u64(&mut w, first.input().len() as u64)?;
    write_layout_key(&mut w, &key)?;
    write_u64(&mut w, examples.len() as u64)?;
    for e in examples {
        if e.input().len() != first.input().len() || e.target().key() != key {
            return Err(ScorerError::ShapeMismatch {
                expected: first.input().len(),
                found: e.input().len(),
            });
        }
        write_f64s(&mut w, e.input())?;
        write_f64s(&mut w, e.target().cells())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_examples<R: Read>(mut r: R) -> Result<Vec<TrainingExample>> {
    read_magic(&mut r, EXAMPLES_MAGIC)?;
    let input_size = read_len(&mut r, "input")?;
    let key = read_layout_key(&mut r)?;
    let n = read_len(&mut r, "example")?;
    (0..n)
        .map(|_| {
            let input = read_f64s(&mut r, input_size)?;
            let cells = read_f64s(&mut r, key.cells())?;
            TrainingExample::new(
                input,
                Sketch::from_cells(key, SketchKind::Probabilities, cells)?,
            )
        })
        .collect()
}
