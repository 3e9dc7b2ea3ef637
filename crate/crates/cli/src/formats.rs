//! On-disk formats: MTC1 clips, MTCK checkpoints, MTFS feature stores,
//! labels CSV, and PNG/PGM frame sequences.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mtc_core::baseline::{BaselineConfig, BaselineParams};
use mtc_core::clip::Clip;
use mtc_core::model::{ModelConfig, ModelParams};
use mtc_core::retrieval::{FeatureRecord, FeatureStore};
use mtc_core::sgd::Parameter;
use mtc_core::synth::MotionType;
use mtc_core::tensor::Tensor;
use serde::{Deserialize, Serialize};

pub const CLIP_MAGIC: &[u8; 4] = b"MTC1";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MTCK";
pub const STORE_MAGIC: &[u8; 4] = b"MTFS";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Write `bytes` via a temp file and rename, so a failure never leaves
/// a partial file at the destination.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    let mut f = fs::File::create(&tmp)
        .with_context(|| format!("cannot create {}", tmp.display()))?;
    let write = f.write_all(bytes).and_then(|_| f.sync_all());
    drop(f);
    if let Err(e) = write {
        let _ = fs::remove_file(&tmp);
        return Err(e).with_context(|| format!("cannot write {}", tmp.display()));
    }
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", tmp.display()))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Reader { bytes, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            bail!("truncated {} file at offset {}", self.what, self.pos);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        Ok(String::from_utf8(self.take(n)?.to_vec())
            .with_context(|| format!("non-UTF-8 name in {} file", self.what))?)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            bail!(
                "{} file has {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            );
        }
        Ok(())
    }
}

pub fn clip_to_bytes(clip: &Clip) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + clip.frames().len());
    out.extend_from_slice(CLIP_MAGIC);
    for v in [clip.t_total(), clip.height(), clip.width(), clip.channels()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(clip.frames());
    out
}

pub fn clip_from_bytes(bytes: &[u8], id: &str) -> Result<Clip> {
    let mut r = Reader::new(bytes, "clip");
    if r.take(4)? != CLIP_MAGIC {
        bail!("bad magic, not an MTC1 clip");
    }
    let t = r.u32()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let c = r.u32()? as usize;
    let payload = r
        .take(t.checked_mul(h * w * c).context("clip dimensions overflow")?)?
        .to_vec();
    r.done()?;
    Ok(Clip::new(payload, t, h, w, c, None, id)?)
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png" | "pgm")
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Load a clip from an MTC1 file or a directory of PNG/PGM frames in
/// lexicographic order. The clip id is the file stem.
pub fn load_clip(path: &Path) -> Result<Clip> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("clip")
        .to_string();
    if path.is_dir() {
        let files = frame_files(path)?;
        if files.is_empty() {
            bail!("no .png or .pgm frames in {}", path.display());
        }
        let mut frames: Vec<u8> = Vec::new();
        let mut dims: Option<(usize, usize, usize)> = None;
        // color if any frame has color, so all frames share C
        let decoded: Vec<image::DynamicImage> = files
            .iter()
            .map(|f| {
                image::open(f).with_context(|| format!("cannot decode {}", f.display()))
            })
            .collect::<Result<_>>()?;
        let color = decoded.iter().any(|img| img.color().has_color());
        for (img, f) in decoded.iter().zip(&files) {
            let (w, h) = (img.width() as usize, img.height() as usize);
            let c = if color { 3 } else { 1 };
            match dims {
                None => dims = Some((h, w, c)),
                Some(d) if d != (h, w, c) => {
                    bail!("frame {} is {}x{}, earlier frames differ", f.display(), h, w)
                }
                _ => {}
            }
            if color {
                frames.extend_from_slice(img.to_rgb8().as_raw());
            } else {
                frames.extend_from_slice(img.to_luma8().as_raw());
            }
        }
        let (h, w, c) = dims.unwrap();
        Ok(Clip::new(frames, files.len(), h, w, c, None, id)?)
    } else {
        let bytes =
            fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        clip_from_bytes(&bytes, &id)
    }
}

pub fn save_clip(clip: &Clip, path: &Path) -> Result<()> {
    write_atomic(path, &clip_to_bytes(clip))
}

/// Write a clip as numbered PNG frames into a directory (created if
/// missing).
pub fn save_clip_png_dir(clip: &Clip, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))?;
    let (h, w) = (clip.height() as u32, clip.width() as u32);
    for t in 0..clip.t_total() {
        let path = dir.join(format!("frame_{t:05}.png"));
        let frame = clip.frame(t).to_vec();
        match clip.channels() {
            1 => image::GrayImage::from_raw(w, h, frame)
                .unwrap()
                .save(&path)
                .with_context(|| format!("cannot write {}", path.display()))?,
            _ => image::RgbImage::from_raw(w, h, frame)
                .unwrap()
                .save(&path)
                .with_context(|| format!("cannot write {}", path.display()))?,
        }
    }
    Ok(())
}

/// Sidecar JSON next to a checkpoint, recording which model the
/// parameters belong to.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CheckpointMeta {
    Segment { model: ModelConfig },
    Baseline { baseline: BaselineConfig },
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut os = checkpoint.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

pub fn params_to_bytes(params: &[Parameter<f32>]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
        for &e in p.value.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<Vec<Parameter<f32>>> {
    let mut r = Reader::new(bytes, "checkpoint");
    if r.take(4)? != CHECKPOINT_MAGIC {
        bail!("bad magic, not an MTCK checkpoint");
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        bail!("unsupported checkpoint version {version}");
    }
    let count = r.u32()? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let data = r.f32s(len)?;
        params.push(Parameter::new(name, Tensor::new(&shape, data)?));
    }
    r.done()?;
    Ok(params)
}

pub fn save_model(params: &ModelParams<f32>, cfg: &ModelConfig, path: &Path) -> Result<()> {
    write_atomic(path, &params_to_bytes(&params.params))?;
    let meta = CheckpointMeta::Segment { model: cfg.clone() };
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(&meta)?.as_bytes())
}

pub fn save_baseline(
    params: &BaselineParams,
    cfg: &BaselineConfig,
    path: &Path,
) -> Result<()> {
    write_atomic(path, &params_to_bytes(&params.params))?;
    let meta = CheckpointMeta::Baseline { baseline: cfg.clone() };
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(&meta)?.as_bytes())
}

pub fn load_meta(path: &Path) -> Result<CheckpointMeta> {
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar)
        .with_context(|| format!("cannot read sidecar {}", sidecar.display()))?;
    Ok(serde_json::from_str(&text)
        .with_context(|| format!("invalid sidecar {}", sidecar.display()))?)
}

pub fn load_model(path: &Path) -> Result<(ModelParams<f32>, ModelConfig)> {
    let cfg = match load_meta(path)? {
        CheckpointMeta::Segment { model } => model,
        CheckpointMeta::Baseline { .. } => {
            bail!("{} is a baseline checkpoint, not a segment model", path.display())
        }
    };
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let params = params_from_bytes(&bytes)?;
    Ok((ModelParams::from_params(params, &cfg)?, cfg))
}

pub fn load_baseline(path: &Path) -> Result<(BaselineParams, BaselineConfig)> {
    let cfg = match load_meta(path)? {
        CheckpointMeta::Baseline { baseline } => baseline,
        CheckpointMeta::Segment { .. } => {
            bail!("{} is a segment-model checkpoint, not a baseline", path.display())
        }
    };
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let params = params_from_bytes(&bytes)?;
    if !params.iter().all(|p| p.name.starts_with("baseline.")) {
        bail!("checkpoint {} has non-baseline parameter names", path.display());
    }
    Ok((BaselineParams { params }, cfg))
}

pub const UNLABELED_CODE: u8 = 255;

pub fn store_to_bytes(store: &FeatureStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(STORE_MAGIC);
    out.extend_from_slice(&(store.feature_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for rec in store.records() {
        out.extend_from_slice(&(rec.id.len() as u32).to_le_bytes());
        out.extend_from_slice(rec.id.as_bytes());
        out.push(rec.label.map_or(UNLABELED_CODE, |m| m.code()));
        for &v in &rec.feature {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn store_from_bytes(bytes: &[u8]) -> Result<FeatureStore> {
    let mut r = Reader::new(bytes, "store");
    if r.take(4)? != STORE_MAGIC {
        bail!("bad magic, not an MTFS store");
    }
    let dim = r.u32()? as usize;
    let n = r.u32()? as usize;
    let mut store = FeatureStore::new(dim);
    for _ in 0..n {
        let id = r.string()?;
        let code = r.u8()?;
        let label = if code == UNLABELED_CODE {
            None
        } else {
            Some(
                MotionType::from_code(code)
                    .with_context(|| format!("record {id:?} has invalid label code {code}"))?,
            )
        };
        let feature = r.f32s(dim)?;
        store.push(FeatureRecord { id, label, feature })?;
    }
    r.done()?;
    Ok(store)
}

pub fn save_store(store: &FeatureStore, path: &Path) -> Result<()> {
    write_atomic(path, &store_to_bytes(store))
}

pub fn load_store(path: &Path) -> Result<FeatureStore> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    store_from_bytes(&bytes)
}

/// Parse a labels CSV (`path,label` header) into (relative path, motion
/// type) pairs in file order.
pub fn parse_labels_csv(text: &str) -> Result<Vec<(String, MotionType)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "path,label" => {}
        other => bail!("labels CSV must start with 'path,label', got {other:?}"),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (path, label) = line
            .split_once(',')
            .with_context(|| format!("labels CSV line {}: missing comma", i + 2))?;
        let motion = MotionType::from_name(label.trim())
            .with_context(|| format!("labels CSV line {}: unknown label {label:?}", i + 2))?;
        out.push((path.trim().to_string(), motion));
    }
    Ok(out)
}

pub fn labels_csv(rows: &[(String, MotionType)]) -> String {
    let mut out = String::from("path,label\n");
    for (path, motion) in rows {
        out.push_str(path);
        out.push(',');
        out.push_str(motion.name());
        out.push('\n');
    }
    out
}
