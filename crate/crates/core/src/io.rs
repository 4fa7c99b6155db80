//! JSON state-set files.
//!
//! ```json
//! {"name": "...", "convention": "...", "dims": [3, 3, 3],
//!  "states": [{"label": "...", "factors": [[[re, im], ...], ...]}]}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::{c, CVector};
use crate::states::{Ket, ProductState, StateSet};

pub const CONVENTION: &str = "tensor index flattening is row-major, last party fastest";

#[derive(Serialize, Deserialize)]
struct FileState {
    label: String,
    factors: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct FileSet {
    name: String,
    #[serde(default)]
    convention: Option<String>,
    dims: Vec<usize>,
    states: Vec<FileState>,
}

pub fn to_json(set: &StateSet) -> Result<String> {
    let file = FileSet {
        name: set.name.clone(),
        convention: Some(CONVENTION.into()),
        dims: set.dims.clone(),
        states: set
            .states
            .iter()
            .map(|s| FileState {
                label: s.label.clone(),
                factors: s.factors.iter().map(|k| k.coeffs().iter().map(|z| [z.re, z.im]).collect()).collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn from_json(text: &str) -> Result<StateSet> {
    let file: FileSet = serde_json::from_str(text)?;
    if let Some(conv) = &file.convention {
        if conv != CONVENTION {
            return domain(format!("unsupported convention '{conv}'"));
        }
    }
    let states = file
        .states
        .into_iter()
        .map(|s| {
            let factors = s
                .factors
                .iter()
                .map(|f| Ket::new(f.iter().map(|&[re, im]| c(re, im)).collect::<CVector>()))
                .collect::<Result<Vec<_>>>()?;
            ProductState::new(s.label, factors)
        })
        .collect::<Result<Vec<_>>>()?;
    StateSet::new(file.name, file.dims, states)
}

pub fn write_set(set: &StateSet, path: &Path) -> Result<()> {
    fs::write(path, to_json(set)?)?;
    Ok(())
}

pub fn read_set(path: &Path) -> Result<StateSet> {
    from_json(&fs::read_to_string(path)?)
}
