//! Binary checkpoint format.
//!
//! ```text
//! "PVOX" | version: u32 | layer count: u32
//! per layer: kind tag u8 | dim count u32 | dims u32... | reals f64...
//! ```
//!
//! All integers and reals are little-endian. Dims per kind:
//! conv `[out, in, kernel, activation]`, maxpool `[pool]`, flatten `[]`,
//! lstm `[units, input_dim]`, dense `[units, input_dim, activation]`,
//! softmax_dense `[units, input_dim]`. Reals are the parameter tensors in
//! [`Layer::params`] order; an lstm record first stores its input and
//! recurrent dropout rates. Activation codes: 0 linear, 1 relu, 2 tanh.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, ConvParams, DenseParams, DropoutRates, Layer, LayerSpec, LstmParams, Model, NnError, Tensor};

pub const MAGIC: &[u8; 4] = b"PVOX";
pub const FORMAT_VERSION: u32 = 1;

fn checkpoint_err(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(model: &Model, mut out: W) -> Result<(), NnError> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(model.layers().len() as u32).to_le_bytes())?;
    for layer in model.layers() {
        let spec = layer.spec();
        let dims: Vec<u32> = match spec {
            LayerSpec::Conv1dSame {
                in_channels,
                out_channels,
                kernel_size,
                activation,
            } => vec![out_channels as u32, in_channels as u32, kernel_size as u32, activation.code()],
            LayerSpec::MaxPool1d { pool_size } => vec![pool_size as u32],
            LayerSpec::FlattenPerStep => Vec::new(),
            LayerSpec::Lstm { input_dim, units, .. } => vec![units as u32, input_dim as u32],
            LayerSpec::Dense {
                input_dim,
                units,
                activation,
            } => vec![units as u32, input_dim as u32, activation.code()],
            LayerSpec::SoftmaxDense { input_dim, units } => vec![units as u32, input_dim as u32],
        };
        out.write_all(&[spec.tag()])?;
        out.write_all(&(dims.len() as u32).to_le_bytes())?;
        for d in dims {
            out.write_all(&d.to_le_bytes())?;
        }
        if let Layer::Lstm { rates, .. } = layer {
            out.write_all(&rates.input.to_le_bytes())?;
            out.write_all(&rates.recurrent.to_le_bytes())?;
        }
        for tensor in layer.params() {
            for v in tensor.data() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], NnError> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| checkpoint_err("unexpected end of checkpoint"))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn tensor(&mut self, shape: &[usize]) -> Result<Tensor, NnError> {
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        Tensor::new(shape.to_vec(), data)
    }
}

fn activation(code: u32) -> Result<Activation, NnError> {
    Activation::from_code(code).ok_or_else(|| checkpoint_err(format!("unknown activation code {code}")))
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Model, NnError> {
    let mut r = Reader { inner: input };
    if &r.bytes::<4>()? != MAGIC {
        return Err(checkpoint_err("bad magic, not a PVOX checkpoint"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(checkpoint_err(format!(
            "unsupported checkpoint version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let [tag] = r.bytes::<1>()?;
        let ndims = r.u32()? as usize;
        if ndims > 8 {
            return Err(checkpoint_err(format!("layer record with {ndims} dims")));
        }
        let dims = (0..ndims).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let expect = |n: usize| {
            if dims.len() == n {
                Ok(())
            } else {
                Err(checkpoint_err(format!("layer tag {tag} expects {n} dims, found {}", dims.len())))
            }
        };
        let layer = match tag {
            0 => {
                expect(4)?;
                let (o, i, k) = (dims[0], dims[1], dims[2]);
                let act = activation(dims[3] as u32)?;
                let weight = r.tensor(&[o, i, k])?;
                let bias = r.tensor(&[o])?;
                Layer::Conv1dSame {
                    params: ConvParams::new(weight, bias)?,
                    activation: act,
                }
            }
            1 => {
                expect(1)?;
                Layer::MaxPool1d { pool_size: dims[0] }
            }
            2 => {
                expect(0)?;
                Layer::FlattenPerStep
            }
            3 => {
                expect(2)?;
                let (h, d) = (dims[0], dims[1]);
                let rates = DropoutRates {
                    input: r.f64()?,
                    recurrent: r.f64()?,
                };
                let w_input = r.tensor(&[4 * h, d])?;
                let w_recurrent = r.tensor(&[4 * h, h])?;
                let bias = r.tensor(&[4 * h])?;
                Layer::Lstm {
                    params: LstmParams::new(w_input, w_recurrent, bias)?,
                    rates,
                }
            }
            4 | 5 => {
                expect(if tag == 4 { 3 } else { 2 })?;
                let (u, d) = (dims[0], dims[1]);
                let weight = r.tensor(&[u, d])?;
                let bias = r.tensor(&[u])?;
                let params = DenseParams::new(weight, bias)?;
                if tag == 4 {
                    Layer::Dense {
                        params,
                        activation: activation(dims[2] as u32)?,
                    }
                } else {
                    Layer::SoftmaxDense { params }
                }
            }
            other => return Err(checkpoint_err(format!("unknown layer tag {other}"))),
        };
        layers.push(layer);
    }
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing)? != 0 {
        return Err(checkpoint_err("trailing bytes after last layer"));
    }
    Model::new(layers)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<(), NnError> {
    let file = File::create(path.as_ref())?;
    write_checkpoint(model, BufWriter::new(file))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model, NnError> {
    let file = File::open(path.as_ref())?;
    read_checkpoint(BufReader::new(file))
}
