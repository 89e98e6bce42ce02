//! Final-state snapshots: JSON with family tags and the layout version.
//! Loading a mismatched layout version fails loudly.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::expfam::{NaturalParam, LAYOUT_VERSION};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub layout_version: u32,
    pub model: String,
    pub globals: Vec<NaturalParam>,
}

pub fn save_snapshot(
    path: impl AsRef<Path>,
    model: &str,
    globals: &[NaturalParam],
) -> Result<()> {
    let path = path.as_ref();
    let snapshot = Snapshot {
        layout_version: LAYOUT_VERSION,
        model: model.to_string(),
        globals: globals.to_vec(),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(BufWriter::new(file), &snapshot)
        .map_err(|e| Error::Numerical(format!("cannot serialize snapshot: {e}")))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let snapshot: Snapshot = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Parse {
            line: 0,
            msg: format!("cannot parse snapshot {}: {e}", path.display()),
        })?;
    if snapshot.layout_version != LAYOUT_VERSION {
        return Err(Error::Config(format!(
            "snapshot {} has layout version {}, this build reads version {}",
            path.display(),
            snapshot.layout_version,
            LAYOUT_VERSION
        )));
    }
    for g in &snapshot.globals {
        g.validate()?;
    }
    Ok(snapshot)
}
