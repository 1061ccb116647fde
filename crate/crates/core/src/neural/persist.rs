//! Model persistence: a key/value text manifest plus a blob of
//! little-endian f32 values concatenated in manifest order.
//!
//! ```text
//! format_version = 1
//! kind = ner
//! config.word_rnn_hidden = 16
//! tensor.word_rnn.w_z = 16 8
//! ```

use std::fs;
use std::path::Path;

use super::tensor::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub kind: String,
    /// `config.*` entries, in file order, without the prefix.
    pub config: Vec<(String, String)>,
    pub tensors: Vec<(String, Vec<usize>)>,
}

impl Manifest {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::data(None, format!("manifest is missing config.{key}")))
    }

    pub fn parse_usize(&self, key: &str) -> Result<usize> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| Error::data(None, format!("config.{key} = {v} is not an integer")))
    }

    pub fn parse_f64(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| Error::data(None, format!("config.{key} = {v} is not a number")))
    }

    /// Render the manifest text.
    pub fn render(&self) -> String {
        let mut out = format!("format_version = {FORMAT_VERSION}\nkind = {}\n", self.kind);
        for (k, v) in &self.config {
            out.push_str(&format!("config.{k} = {v}\n"));
        }
        for (name, shape) in &self.tensors {
            let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
            out.push_str(&format!("tensor.{name} = {}\n", dims.join(" ")));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        let mut version = None;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(" = ")
                .ok_or_else(|| Error::parse(lineno, "expected `key = value`"))?;
            if key == "format_version" {
                let v: u32 = value
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad format_version"))?;
                if v != FORMAT_VERSION {
                    return Err(Error::parse(lineno, format!("unsupported format version {v}")));
                }
                version = Some(v);
            } else if key == "kind" {
                m.kind = value.to_string();
            } else if let Some(k) = key.strip_prefix("config.") {
                m.config.push((k.to_string(), value.to_string()));
            } else if let Some(name) = key.strip_prefix("tensor.") {
                let shape = value
                    .split_whitespace()
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::parse(lineno, "bad tensor shape"))?;
                m.tensors.push((name.to_string(), shape));
            } else {
                return Err(Error::parse(lineno, format!("unknown key {key}")));
            }
        }
        if version.is_none() {
            return Err(Error::parse(1, "missing format_version"));
        }
        if m.kind.is_empty() {
            return Err(Error::parse(1, "missing kind"));
        }
        Ok(m)
    }
}

/// Serialize all tensors as little-endian f32 in store order.
pub fn encode_blob(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(store.count() * 4);
    for (_, _, t) in store.iter() {
        for x in &t.data {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_model(dir: &Path, kind: &str, config: &[(String, String)], store: &ParamStore) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        kind: kind.to_string(),
        config: config.to_vec(),
        tensors: store
            .iter()
            .map(|(_, n, t)| (n.to_string(), t.shape.clone()))
            .collect(),
    };
    fs::write(dir.join(MANIFEST_FILE), manifest.render())?;
    fs::write(dir.join(WEIGHTS_FILE), encode_blob(store))?;
    Ok(())
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    Manifest::parse(&fs::read_to_string(dir.join(MANIFEST_FILE))?)
}

pub fn load_model(dir: &Path) -> Result<(Manifest, ParamStore)> {
    let manifest = load_manifest(dir)?;
    let blob = fs::read(dir.join(WEIGHTS_FILE))?;
    let expected: usize = manifest
        .tensors
        .iter()
        .map(|(_, s)| s.iter().product::<usize>())
        .sum();
    if blob.len() != expected * 4 {
        return Err(Error::data(
            None,
            format!("weights blob has {} bytes, manifest needs {}", blob.len(), expected * 4),
        ));
    }
    let mut store = ParamStore::new();
    let mut values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    for (name, shape) in &manifest.tensors {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = values.by_ref().take(n).collect();
        store.add(name, Tensor::from_vec(shape, data)?)?;
    }
    Ok((manifest, store))
}

/// Copy the tensors of `loaded` into `target`, matching by name and shape.
pub fn restore_into(target: &mut ParamStore, loaded: &ParamStore) -> Result<()> {
    if target.len() != loaded.len() {
        return Err(Error::data(
            None,
            format!("model has {} tensors, file has {}", target.len(), loaded.len()),
        ));
    }
    for (id, name, t) in loaded.iter() {
        let dst = target
            .id(name)
            .ok_or_else(|| Error::data(None, format!("unexpected tensor {name}")))?;
        if dst != id || target.get(dst).shape != t.shape {
            return Err(Error::data(
                None,
                format!("tensor {name} does not match the model layout"),
            ));
        }
        target.get_mut(dst).data.clone_from(&t.data);
    }
    Ok(())
}
