//! Binary weight persistence.
//!
//! Layout, all integers little-endian u32, all floats little-endian f64:
//! an 8-byte magic, the input shape, the layer count, then each layer as a
//! tag plus its descriptors and parameter arrays. The reader consumes
//! exactly the declared structure and then requires end-of-file, so any
//! truncated or padded file fails as a format error before a network is
//! assembled; round trips preserve every bit of every parameter.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{Layer, Network};

pub const MAGIC: &[u8; 8] = b"EMFVNET1";

const TAG_CONV: u32 = 0;
const TAG_RELU: u32 = 1;
const TAG_MAXPOOL: u32 = 2;
const TAG_DENSE: u32 = 3;
const TAG_SOFTMAX: u32 = 4;

/// Upper bound on any single stored dimension; a header field above this is
/// corrupt, not large.
const MAX_EXTENT: u32 = 1 << 20;

pub fn save_weights(net: &Network, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_network(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<Network> {
    let file = File::open(path)?;
    read_network(&mut BufReader::new(file))
}

pub fn write_network<W: Write>(net: &Network, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    let (c, h, wid) = net.input_shape();
    put_u32(w, c as u32)?;
    put_u32(w, h as u32)?;
    put_u32(w, wid as u32)?;
    put_u32(w, net.layers().len() as u32)?;
    for layer in net.layers() {
        match layer {
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                weights,
                bias,
            } => {
                put_u32(w, TAG_CONV)?;
                for v in [in_channels, out_channels, kernel, stride, padding] {
                    put_u32(w, *v as u32)?;
                }
                put_f64s(w, weights)?;
                put_f64s(w, bias)?;
            }
            Layer::Relu => put_u32(w, TAG_RELU)?,
            Layer::MaxPool { size } => {
                put_u32(w, TAG_MAXPOOL)?;
                put_u32(w, *size as u32)?;
            }
            Layer::Dense {
                inputs,
                outputs,
                weights,
                bias,
            } => {
                put_u32(w, TAG_DENSE)?;
                put_u32(w, *inputs as u32)?;
                put_u32(w, *outputs as u32)?;
                put_f64s(w, weights)?;
                put_f64s(w, bias)?;
            }
            Layer::Softmax => put_u32(w, TAG_SOFTMAX)?,
        }
    }
    Ok(())
}

pub fn read_network<R: Read>(r: &mut R) -> Result<Network> {
    let mut magic = [0u8; 8];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let c = take_extent(r, "input channels")?;
    let h = take_extent(r, "input height")?;
    let wid = take_extent(r, "input width")?;
    let layer_count = take_extent(r, "layer count")?;
    let mut layers = Vec::with_capacity(layer_count);
    for i in 0..layer_count {
        let tag = take_u32(r)?;
        let layer = match tag {
            TAG_CONV => {
                let in_channels = take_extent(r, "conv input channels")?;
                let out_channels = take_extent(r, "conv output channels")?;
                let kernel = take_extent(r, "conv kernel")?;
                let stride = take_extent(r, "conv stride")?;
                let padding = take_extent(r, "conv padding")?;
                let weights = take_f64s(r, out_channels * in_channels * kernel * kernel)?;
                let bias = take_f64s(r, out_channels)?;
                Layer::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    weights,
                    bias,
                }
            }
            TAG_RELU => Layer::Relu,
            TAG_MAXPOOL => Layer::MaxPool {
                size: take_extent(r, "pool size")?,
            },
            TAG_DENSE => {
                let inputs = take_extent(r, "dense inputs")?;
                let outputs = take_extent(r, "dense outputs")?;
                let weights = take_f64s(r, outputs * inputs)?;
                let bias = take_f64s(r, outputs)?;
                Layer::Dense {
                    inputs,
                    outputs,
                    weights,
                    bias,
                }
            }
            TAG_SOFTMAX => Layer::Softmax,
            other => {
                return Err(Error::Format(format!(
                    "unknown layer tag {other} at layer {i}"
                )))
            }
        };
        layers.push(layer);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after final layer".into()));
    }
    Network::assemble((c, h, wid), layers)
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("unexpected end of file".into())
        } else {
            Error::Io(e)
        }
    })
}

fn take_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn take_extent<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = take_u32(r)?;
    if v > MAX_EXTENT {
        return Err(Error::Format(format!("{what} {v} exceeds format bound")));
    }
    Ok(v as usize)
}

fn take_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        read_exact(r, &mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}
