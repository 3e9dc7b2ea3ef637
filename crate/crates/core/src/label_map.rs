//! Action-name to motion-type mapping, loaded from a two-column CSV
//! (`action,motion_type`). The repository ships `data/mhmdb51.csv` with
//! the 51-action map.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};

use crate::error::{Error, Result};
use crate::synth::MotionType;

#[derive(Debug, Clone, Default)]
pub struct LabelMap {
    entries: BTreeMap<String, MotionType>,
}

impl LabelMap {
    pub fn get(&self, action: &str) -> Option<MotionType> {
        self.entries.get(action).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, MotionType)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Count of actions per motion type, indexed by class code.
    pub fn histogram(&self) -> [usize; 5] {
        let mut h = [0usize; 5];
        for (_, m) in self.iter() {
            h[m.code() as usize] += 1;
        }
        h
    }
}

/// Parse CSV text with header `action,motion_type`. Duplicate actions
/// and unknown motion-type tokens are format errors.
pub fn parse_label_map(text: &str) -> Result<LabelMap> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == "action,motion_type" => {}
        other => {
            return Err(Error::Format(format!(
                "expected header 'action,motion_type', got {other:?}"
            )))
        }
    }
    let mut entries = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (action, motion) = line.split_once(',').ok_or_else(|| {
            Error::Format(format!("line {}: missing comma: {line:?}", lineno + 2))
        })?;
        let action = action.trim();
        let motion = MotionType::from_name(motion.trim()).ok_or_else(|| {
            Error::Format(format!(
                "line {}: unknown motion type {:?}",
                lineno + 2,
                motion.trim()
            ))
        })?;
        if entries.insert(action.to_string(), motion).is_some() {
            return Err(Error::Format(format!(
                "line {}: duplicate action {action:?}",
                lineno + 2
            )));
        }
    }
    Ok(LabelMap { entries })
}
