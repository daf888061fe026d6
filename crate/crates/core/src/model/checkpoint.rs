//! Model checkpoints: a versioned binary file plus a human-readable
//! manifest.
//!
//! Layout of the binary file, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "MTCHKPT1"
//! u32     header length
//! bytes   header JSON: {version, config, langs, vocab}
//! u32     number of parameter groups
//! per group:
//!   u32   name length, then the name in UTF-8
//!   u64   element count, then that many f64 values
//! ```
//!
//! Groups appear in the canonical order of [`ParamSet::groups`]. The
//! vocabulary travels inside the header so a saved model is usable for
//! translation without hunting for side files. A companion `<path>.manifest`
//! lists every array with its shape and SHA-256 checksum; when present at
//! load time it is re-verified, so silent corruption is caught.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{group_shapes, init_model, ModelConfig, ParamSet, Seq2SeqModel};
use crate::corpus::LangId;
use crate::error::{Error, Result};
use crate::vocab::Vocab;

const MAGIC: &[u8; 8] = b"MTCHKPT1";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    langs: Vec<LangId>,
    vocab: Vec<String>,
}

fn group_bytes(data: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Saves the model and its vocabulary, writing `<path>` and
/// `<path>.manifest`.
pub fn save_checkpoint(model: &Seq2SeqModel, vocab: &Vocab, path: &Path) -> Result<()> {
    if vocab.len() != model.config.vocab_size {
        return Err(Error::Model(format!(
            "vocabulary has {} symbols but the model was built for {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    let header = Header {
        version: VERSION,
        config: model.config.clone(),
        langs: model.langs.clone(),
        vocab: vocab.symbols().to_vec(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let groups = model.params.groups();
    let shapes = group_shapes(&model.config, model.langs.len());

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "# model checkpoint manifest, format v{VERSION}");
    let _ = writeln!(manifest, "# array\tshape\tsha256");
    (|| -> std::io::Result<()> {
        file.write_all(MAGIC)?;
        file.write_all(&(header_json.len() as u32).to_le_bytes())?;
        file.write_all(&header_json)?;
        file.write_all(&(groups.len() as u32).to_le_bytes())?;
        for ((name, data), (sname, shape)) in groups.iter().zip(&shapes) {
            debug_assert_eq!(name, sname);
            file.write_all(&(name.len() as u32).to_le_bytes())?;
            file.write_all(name.as_bytes())?;
            file.write_all(&(data.len() as u64).to_le_bytes())?;
            let bytes = group_bytes(data);
            file.write_all(&bytes)?;
            let digest = Sha256::digest(&bytes);
            let shape_txt = shape
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join("x");
            let _ = writeln!(manifest, "{name}\t{shape_txt}\t{digest:x}");
        }
        Ok(())
    })()
    .map_err(|e| Error::io(path, e))?;
    let manifest_path = manifest_path(path);
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))
}

fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".manifest");
    os.into()
}

/// Loads a checkpoint saved by [`save_checkpoint`], re-verifying manifest
/// checksums when the manifest is present.
pub fn load_checkpoint(path: &Path) -> Result<(Seq2SeqModel, Vocab)> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(bad("not a model checkpoint (bad magic)"));
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    file.read_exact(&mut u32buf).map_err(|e| Error::io(path, e))?;
    let header_len = u32::from_le_bytes(u32buf) as usize;
    let mut header_json = vec![0u8; header_len];
    file.read_exact(&mut header_json)
        .map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_slice(&header_json)?;
    if header.version != VERSION {
        return Err(bad(&format!(
            "unsupported checkpoint version {}",
            header.version
        )));
    }
    header.config.validate()?;
    let vocab = Vocab::from_full_list(header.vocab)?;
    if vocab.len() != header.config.vocab_size {
        return Err(bad("vocabulary size disagrees with the stored config"));
    }

    let mut params = ParamSet::zeros(&header.config, header.langs.len());
    file.read_exact(&mut u32buf).map_err(|e| Error::io(path, e))?;
    let n_groups = u32::from_le_bytes(u32buf) as usize;
    let expected = params.groups().len();
    if n_groups != expected {
        return Err(bad(&format!(
            "checkpoint stores {n_groups} parameter groups, config implies {expected}"
        )));
    }
    let checksums = load_manifest_checksums(&manifest_path(path))?;
    for (name, data) in params.groups_mut() {
        file.read_exact(&mut u32buf).map_err(|e| Error::io(path, e))?;
        let name_len = u32::from_le_bytes(u32buf) as usize;
        let mut name_buf = vec![0u8; name_len];
        file.read_exact(&mut name_buf)
            .map_err(|e| Error::io(path, e))?;
        let stored_name = String::from_utf8(name_buf)
            .map_err(|_| bad("parameter group name is not valid UTF-8"))?;
        if stored_name != name {
            return Err(bad(&format!(
                "parameter group {stored_name} found where {name} was expected"
            )));
        }
        file.read_exact(&mut u64buf).map_err(|e| Error::io(path, e))?;
        let count = u64::from_le_bytes(u64buf) as usize;
        if count != data.len() {
            return Err(bad(&format!(
                "group {name} stores {count} values, config implies {}",
                data.len()
            )));
        }
        let mut bytes = vec![0u8; count * 8];
        file.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
        if let Some(sums) = &checksums {
            let digest = format!("{:x}", Sha256::digest(&bytes));
            match sums.get(&name) {
                Some(want) if *want == digest => {}
                Some(_) => {
                    return Err(bad(&format!(
                        "checksum mismatch for group {name}; the checkpoint is corrupt"
                    )))
                }
                None => return Err(bad(&format!("manifest is missing group {name}"))),
            }
        }
        for (i, v) in data.iter_mut().enumerate() {
            *v = f64::from_le_bytes(bytes[i * 8..(i + 1) * 8].try_into().unwrap());
        }
    }
    let mut trailing = [0u8; 1];
    if file.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing bytes after the last parameter group"));
    }
    Ok((
        Seq2SeqModel {
            config: header.config,
            langs: header.langs,
            params,
        },
        vocab,
    ))
}

fn load_manifest_checksums(
    path: &Path,
) -> Result<Option<std::collections::HashMap<String, String>>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut map = std::collections::HashMap::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(name), Some(_shape), Some(sum)) => {
                map.insert(name.to_string(), sum.to_string());
            }
            _ => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    msg: "manifest lines must be name<TAB>shape<TAB>sha256".into(),
                })
            }
        }
    }
    Ok(Some(map))
}

/// Convenience used by tests and tools: a freshly initialized model saved
/// and reloaded must be bitwise identical.
#[allow(dead_code)]
pub(crate) fn reload_roundtrip(config: &ModelConfig, langs: &[LangId], vocab: &Vocab, dir: &Path) -> Result<bool> {
    let model = init_model(config, langs)?;
    let path = dir.join("model.ckpt");
    save_checkpoint(&model, vocab, &path)?;
    let (loaded, loaded_vocab) = load_checkpoint(&path)?;
    Ok(loaded == model && &loaded_vocab == vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelConfig, Vec<LangId>, Vocab) {
        let vocab = Vocab::from_symbols(["aa", "bb", "cc", "dd", "ee", "ff", "gg"]).unwrap();
        let cfg = ModelConfig {
            vocab_size: vocab.len(),
            max_len: 8,
            embed_dim: 8,
            hidden_dim: 12,
            num_layers: 1,
            num_heads: 2,
            learning_rate: 0.1,
            seed: 42,
        };
        (cfg, vec![LangId::new("aa"), LangId::new("bb")], vocab)
    }

    #[test]
    fn roundtrip_is_bitwise_identical() {
        let (cfg, langs, vocab) = setup();
        let dir = tempfile::tempdir().unwrap();
        let model = init_model(&cfg, &langs).unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &vocab, &path).unwrap();
        let (loaded, loaded_vocab) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded_vocab, vocab);
    }

    #[test]
    fn manifest_lists_every_group_with_shape() {
        let (cfg, langs, vocab) = setup();
        let dir = tempfile::tempdir().unwrap();
        let model = init_model(&cfg, &langs).unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &vocab, &path).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("m.ckpt.manifest")).unwrap();
        let lines: Vec<&str> = manifest
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect();
        assert_eq!(lines.len(), model.params.groups().len());
        let tok_line = lines.iter().find(|l| l.starts_with("tok_embed\t")).unwrap();
        assert!(tok_line.contains(&format!("\t{}x{}\t", cfg.vocab_size, cfg.embed_dim)));
        for line in lines {
            let sum = line.rsplit('\t').next().unwrap();
            assert_eq!(sum.len(), 64, "sha256 hex expected: {line}");
        }
    }

    #[test]
    fn corruption_is_detected_via_manifest() {
        let (cfg, langs, vocab) = setup();
        let dir = tempfile::tempdir().unwrap();
        let model = init_model(&cfg, &langs).unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &vocab, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 5] ^= 0xff; // falls inside the final f64 array
        std::fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("checksum mismatch"), "got: {err}");
    }

    #[test]
    fn missing_manifest_still_loads() {
        let (cfg, langs, vocab) = setup();
        let dir = tempfile::tempdir().unwrap();
        let model = init_model(&cfg, &langs).unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &vocab, &path).unwrap();
        std::fs::remove_file(dir.path().join("m.ckpt.manifest")).unwrap();
        let (loaded, _) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn junk_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn vocab_size_mismatch_rejected_on_save() {
        let (cfg, langs, _) = setup();
        let dir = tempfile::tempdir().unwrap();
        let model = init_model(&cfg, &langs).unwrap();
        let small = Vocab::from_symbols(["zz"]).unwrap();
        assert!(save_checkpoint(&model, &small, &dir.path().join("m.ckpt")).is_err());
    }
}
