//! Single-file checkpoint archive.
//!
//! Layout (little endian):
//!
//! ```text
//! magic[8] | version u32 | payload_len u64 | crc32(payload) u32 | payload
//! payload = header_len u32 | header (JSON) | array*
//! array   = name_len u16 | name | dtype u8 | rank u8 | dim u64 * rank | data
//! ```
//!
//! The header echoes all configs and holds the step counters and sampler
//! positions. Arrays hold parameters, batch-norm running statistics and
//! optimiser moments.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainerState, TrainingConfig, TrainingError, TrainingResult};
use crate::data::SamplerState;
use crate::nets::{DiscriminatorConfig, GeneratorConfig, Network};
use crate::tensor::{DType, OptimizerState, Real, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PLGNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const PREAMBLE: usize = 8 + 4 + 8 + 4;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    training: TrainingConfig,
    generator: GeneratorConfig,
    discriminator: DiscriminatorConfig,
    step: u64,
    optimizer_steps: [u64; 4],
    samplers: [SamplerState; 2],
}

struct Array {
    dtype: DType,
    shape: Vec<usize>,
    bytes: Vec<u8>,
}

const NETS: [&str; 4] = ["g_a", "g_b", "d_a", "d_b"];

fn networks<T: Real>(s: &TrainerState<T>) -> [&dyn Network<T>; 4] {
    [&s.nets.g_a, &s.nets.g_b, &s.nets.d_a, &s.nets.d_b]
}

fn optimizers<T: Real>(s: &TrainerState<T>) -> [&OptimizerState<T>; 4] {
    [&s.opt_g_a, &s.opt_g_b, &s.opt_d_a, &s.opt_d_b]
}

fn write_array<T: Real>(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[T]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(T::DTYPE.code());
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&T::to_le_bytes_vec(data));
}

fn encode<T: Real>(state: &TrainerState<T>) -> Vec<u8> {
    let header = Header {
        training: state.config.clone(),
        generator: state.generator_config.clone(),
        discriminator: state.discriminator_config.clone(),
        step: state.step,
        optimizer_steps: optimizers(state).map(|o| o.step),
        samplers: state.samplers,
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut payload = Vec::new();
    payload.extend_from_slice(&(json.len() as u32).to_le_bytes());
    payload.extend_from_slice(&json);
    for (prefix, net) in NETS.iter().zip(networks(state)) {
        for (name, t) in net.named_params() {
            write_array(&mut payload, &format!("{prefix}.{name}"), t.shape(), t.data());
        }
        for (name, b) in net.named_buffers() {
            write_array(&mut payload, &format!("{prefix}.{name}"), &[b.len()], b);
        }
    }
    for (prefix, opt) in NETS.iter().zip(optimizers(state)) {
        for (i, (m, v)) in opt.first.iter().zip(&opt.second).enumerate() {
            write_array(&mut payload, &format!("opt.{prefix}.first.{i}"), &[m.len()], m);
            write_array(&mut payload, &format!("opt.{prefix}.second.{i}"), &[v.len()], v);
        }
    }
    let mut file = Vec::with_capacity(PREAMBLE + payload.len());
    file.extend_from_slice(CHECKPOINT_MAGIC);
    file.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    file.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    file.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    file.extend_from_slice(&payload);
    file
}

/// Writes the state atomically (temporary file, then rename).
pub fn save_checkpoint<T: Real>(state: &TrainerState<T>, path: &Path) -> TrainingResult<()> {
    let io = |source| TrainingError::Io { path: path.to_path_buf(), source };
    let bytes = encode(state);
    let tmp = path.with_extension("ckpt.partial");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(&bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.buf.len() - self.pos < n {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn decode_payload(payload: &[u8]) -> Result<(Header, BTreeMap<String, Array>), String> {
    let mut r = Reader { buf: payload, pos: 0 };
    let header_len = r.u32()? as usize;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| format!("header: {e}"))?;
    let mut arrays = BTreeMap::new();
    while !r.done() {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| "array name is not UTF-8")?;
        let code = r.u8()?;
        let dtype = DType::from_code(code).ok_or_else(|| format!("{name}: unknown dtype {code}"))?;
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let count = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or("array too large")?;
        let bytes = r.take(count.checked_mul(dtype.size()).ok_or("array too large")?)?.to_vec();
        if arrays.insert(name.clone(), Array { dtype, shape, bytes }).is_some() {
            return Err(format!("duplicate array {name}"));
        }
    }
    Ok((header, arrays))
}

fn take_array<T: Real>(arrays: &mut BTreeMap<String, Array>, name: &str, shape: &[usize]) -> Result<Vec<T>, String> {
    let a = arrays.remove(name).ok_or_else(|| format!("missing array {name}"))?;
    if a.dtype != T::DTYPE {
        return Err(format!("{name}: stored as {:?}, requested {:?}", a.dtype, T::DTYPE));
    }
    if a.shape != shape {
        return Err(format!("{name}: stored shape {:?}, expected {shape:?}", a.shape));
    }
    Ok(T::from_le_bytes_slice(&a.bytes))
}

fn restore<T: Real>(header: Header, mut arrays: BTreeMap<String, Array>) -> Result<TrainerState<T>, String> {
    let mut state = TrainerState::<T>::new(header.training, header.generator, header.discriminator)
        .map_err(|e| format!("configs: {e}"))?;
    state.step = header.step;
    state.samplers = header.samplers;
    {
        let nets = &mut state.nets;
        let list: [&mut dyn Network<T>; 4] = [&mut nets.g_a, &mut nets.g_b, &mut nets.d_a, &mut nets.d_b];
        for (prefix, net) in NETS.iter().zip(list) {
            let names: Vec<(String, Vec<usize>)> =
                net.named_params().iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
            for ((name, shape), p) in names.iter().zip(net.params_mut()) {
                let data = take_array(&mut arrays, &format!("{prefix}.{name}"), shape)?;
                *p = Tensor::new(shape, data).map_err(|e| e.to_string())?;
            }
            let names: Vec<String> = net.named_buffers().into_iter().map(|(n, _)| n).collect();
            for (name, b) in names.iter().zip(net.buffers_mut()) {
                *b = take_array(&mut arrays, &format!("{prefix}.{name}"), &[b.len()])?;
            }
        }
    }
    let opts = [&mut state.opt_g_a, &mut state.opt_g_b, &mut state.opt_d_a, &mut state.opt_d_b];
    for ((prefix, opt), step) in NETS.iter().zip(opts).zip(header.optimizer_steps) {
        opt.step = step;
        for (i, (m, v)) in opt.first.iter_mut().zip(opt.second.iter_mut()).enumerate() {
            *m = take_array(&mut arrays, &format!("opt.{prefix}.first.{i}"), &[m.len()])?;
            *v = take_array(&mut arrays, &format!("opt.{prefix}.second.{i}"), &[v.len()])?;
        }
    }
    if let Some(extra) = arrays.keys().next() {
        return Err(format!("unexpected array {extra}"));
    }
    Ok(state)
}

/// Reads a checkpoint written by [`save_checkpoint`]. Any damage (bad magic,
/// other version, truncation, checksum mismatch, missing or misshapen arrays)
/// is rejected before a state is returned.
pub fn load_checkpoint<T: Real>(path: &Path) -> TrainingResult<TrainerState<T>> {
    let fail = |detail: String| TrainingError::Checkpoint { path: path.to_path_buf(), detail };
    let bytes = fs::read(path).map_err(|source| TrainingError::Io { path: path.to_path_buf(), source })?;
    if bytes.len() < PREAMBLE {
        return Err(fail(format!("truncated: {} bytes", bytes.len())));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(fail("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(fail(format!("format version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let crc = u32::from_le_bytes(bytes[20..24].try_into().unwrap());
    let payload = &bytes[PREAMBLE..];
    if payload.len() as u64 != len {
        return Err(fail(format!("payload is {} bytes, header says {len}", payload.len())));
    }
    if crc32fast::hash(payload) != crc {
        return Err(fail("checksum mismatch".into()));
    }
    let (header, arrays) = decode_payload(payload).map_err(fail)?;
    restore(header, arrays).map_err(fail)
}
