//! Named-tensor container stored as safetensors, with a string metadata
//! map. Tensor bytes are kept verbatim (little endian), so a write/read
//! cycle is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use safetensors::tensor::{Dtype, SafeTensors};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorData {
    pub dtype: ElementType,
    pub shape: Vec<usize>,
    pub bytes: Vec<u8>,
}

impl TensorData {
    pub fn from_f32(a: &ArrayD<f32>) -> Self {
        TensorData {
            dtype: ElementType::F32,
            shape: a.shape().to_vec(),
            bytes: a.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    pub fn from_f64(a: &ArrayD<f64>) -> Self {
        TensorData {
            dtype: ElementType::F64,
            shape: a.shape().to_vec(),
            bytes: a.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorFile {
    pub tensors: BTreeMap<String, TensorData>,
    pub metadata: BTreeMap<String, String>,
}

impl TensorFile {
    pub fn insert(&mut self, name: impl Into<String>, data: TensorData) {
        self.tensors.insert(name.into(), data);
    }

    pub fn read(path: &Path) -> Result<Self> {
        let buffer = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buffer).map_err(|e| match e {
            Error::Load(msg) => Error::Load(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_bytes(buffer: &[u8]) -> Result<Self> {
        let (_, meta) = SafeTensors::read_metadata(buffer).map_err(|e| Error::Load(e.to_string()))?;
        let st = SafeTensors::deserialize(buffer).map_err(|e| Error::Load(e.to_string()))?;
        let mut out = TensorFile {
            metadata: meta
                .metadata()
                .clone()
                .unwrap_or_default()
                .into_iter()
                .collect(),
            ..Default::default()
        };
        for (name, view) in st.tensors() {
            let dtype = match view.dtype() {
                Dtype::F32 => ElementType::F32,
                Dtype::F64 => ElementType::F64,
                other => return Err(Error::Load(format!("{name}: unsupported dtype {other:?}"))),
            };
            out.tensors.insert(
                name,
                TensorData {
                    dtype,
                    shape: view.shape().to_vec(),
                    bytes: view.data().to_vec(),
                },
            );
        }
        Ok(out)
    }

    /// Serializes in safetensors layout with tensors and metadata in
    /// sorted key order, so equal contents always give identical bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = serde_json::Map::new();
        if !self.metadata.is_empty() {
            header.insert(
                "__metadata__".into(),
                serde_json::to_value(&self.metadata).expect("string map"),
            );
        }
        let mut offset = 0usize;
        for (name, t) in &self.tensors {
            let width = match t.dtype {
                ElementType::F32 => 4,
                ElementType::F64 => 8,
            };
            if t.bytes.len() != t.shape.iter().product::<usize>() * width {
                return Err(Error::Load(format!("{name}: byte length does not match shape")));
            }
            let dtype = match t.dtype {
                ElementType::F32 => "F32",
                ElementType::F64 => "F64",
            };
            header.insert(
                name.clone(),
                serde_json::json!({
                    "dtype": dtype,
                    "shape": t.shape,
                    "data_offsets": [offset, offset + t.bytes.len()],
                }),
            );
            offset += t.bytes.len();
        }
        let mut json = serde_json::to_vec(&serde_json::Value::Object(header)).expect("json");
        while !json.len().is_multiple_of(8) {
            json.push(b' ');
        }
        let mut out = Vec::with_capacity(8 + json.len() + offset);
        out.extend((json.len() as u64).to_le_bytes());
        out.extend(json);
        for t in self.tensors.values() {
            out.extend(&t.bytes);
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    fn get(&self, name: &str, dtype: ElementType) -> Result<&TensorData> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::Load(format!("missing tensor `{name}`")))?;
        if t.dtype != dtype {
            return Err(Error::Load(format!("tensor `{name}` is {:?}, expected {dtype:?}", t.dtype)));
        }
        Ok(t)
    }

    pub fn f32_tensor(&self, name: &str) -> Result<ArrayD<f32>> {
        let t = self.get(name, ElementType::F32)?;
        let values = t
            .bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        ArrayD::from_shape_vec(IxDyn(&t.shape), values).map_err(|e| Error::Load(format!("{name}: {e}")))
    }

    pub fn f64_tensor(&self, name: &str) -> Result<ArrayD<f64>> {
        let t = self.get(name, ElementType::F64)?;
        let values = t
            .bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        ArrayD::from_shape_vec(IxDyn(&t.shape), values).map_err(|e| Error::Load(format!("{name}: {e}")))
    }
}
