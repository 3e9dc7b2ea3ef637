//! Synthetic dataset directories: one subdirectory per split, MTC1
//! clips plus a `labels.csv` manifest.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mtc_core::synth::{self, Split, SynthConfig};
use mtc_core::trainer::LabeledClip;

use crate::formats;

pub const SPLIT_DIRS: [(&str, Split); 3] = [
    ("train", Split::Train),
    ("val", Split::Val),
    ("test", Split::Test),
];

/// Generate the corpus onto disk. Returns per-split clip counts in
/// train/val/test order. Clips derive their seeds from (class, index),
/// so generation order does not matter and threads just partition the
/// plan; the manifests always follow plan order.
pub fn write_dataset(
    cfg: &SynthConfig,
    fractions: (f64, f64, f64),
    out: &Path,
    threads: usize,
) -> Result<[usize; 3]> {
    let plan = synth::dataset_plan(cfg, fractions)?;
    for (dir, _) in SPLIT_DIRS {
        fs::create_dir_all(out.join(dir))
            .with_context(|| format!("cannot create {}", out.join(dir).display()))?;
    }
    let slot_of = |entry: &synth::PlannedClip| {
        SPLIT_DIRS
            .iter()
            .position(|&(_, s)| s == entry.split)
            .expect("split covered")
    };
    let write_one = |entry: &synth::PlannedClip| -> Result<()> {
        let clip = synth::gen_clip(entry.class, cfg, entry.index)?;
        let slot = slot_of(entry);
        let file = format!("{}.mtc1", clip.id);
        formats::save_clip(&clip, &out.join(SPLIT_DIRS[slot].0).join(&file))
    };
    if threads <= 1 {
        for entry in &plan {
            write_one(entry)?;
        }
    } else {
        let chunk = plan.len().div_ceil(threads).max(1);
        std::thread::scope(|s| -> Result<()> {
            let mut handles = Vec::new();
            for part in plan.chunks(chunk) {
                handles.push(s.spawn(move || -> Result<()> {
                    for entry in part {
                        write_one(entry)?;
                    }
                    Ok(())
                }));
            }
            for h in handles {
                h.join().expect("worker panicked")?;
            }
            Ok(())
        })?;
    }
    let mut counts = [0usize; 3];
    let mut manifests: [Vec<(String, mtc_core::synth::MotionType)>; 3] = Default::default();
    for entry in &plan {
        let slot = slot_of(entry);
        manifests[slot].push((
            format!("{}_{:04}.mtc1", entry.class.name(), entry.index),
            entry.class,
        ));
        counts[slot] += 1;
    }
    for (slot, (dir, _)) in SPLIT_DIRS.iter().enumerate() {
        formats::write_atomic(
            &out.join(dir).join("labels.csv"),
            formats::labels_csv(&manifests[slot]).as_bytes(),
        )?;
    }
    Ok(counts)
}

/// Load every clip listed in `dir/labels.csv`, paths relative to `dir`.
pub fn load_labeled_dir(dir: &Path) -> Result<Vec<LabeledClip>> {
    let manifest = dir.join("labels.csv");
    let text = fs::read_to_string(&manifest)
        .with_context(|| format!("cannot read {}", manifest.display()))?;
    let rows = formats::parse_labels_csv(&text)?;
    let mut out = Vec::with_capacity(rows.len());
    for (rel, label) in rows {
        let clip = formats::load_clip(&dir.join(&rel))?;
        out.push(LabeledClip { clip, label });
    }
    Ok(out)
}
