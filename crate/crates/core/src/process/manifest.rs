//! JSON manifests for processes and instruments. Matrices live in
//! text-format files referenced by path relative to the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Instrument, Party, ProcessMatrix};
use crate::error::{Error, Result};
use crate::tensor_core::text::{read_operator, read_records, write_operator, write_records, NamedOperator};
use crate::tensor_core::{LabeledOperator, SystemLabel};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartySpec {
    pub name: String,
    #[serde(default)]
    pub input: Option<String>,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProcessManifest {
    pub matrix: String,
    pub parties: Vec<PartySpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstrumentManifest {
    pub party: String,
    #[serde(default)]
    pub quantum_inputs: Vec<String>,
    #[serde(default)]
    pub input: Option<String>,
    #[serde(default)]
    pub output: Option<String>,
    pub classical_inputs: usize,
    pub outcomes: usize,
    /// Records ordered input-major: (x=0,a=0), (x=0,a=1), ...
    pub elements: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstrumentSetManifest {
    pub instruments: Vec<InstrumentManifest>,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn find_label(op: &LabeledOperator, name: &Option<String>) -> Result<Option<SystemLabel>> {
    match name {
        None => Ok(None),
        Some(n) => op.label(n).cloned().map(Some).ok_or_else(|| Error::UnknownLabel(n.clone())),
    }
}

pub fn load_process(path: impl AsRef<Path>) -> Result<ProcessMatrix> {
    let path = path.as_ref();
    let m: ProcessManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let op = read_operator(resolve(path, &m.matrix))?;
    let parties = m
        .parties
        .iter()
        .map(|p| Ok(Party::new(&p.name, find_label(&op, &p.input)?, find_label(&op, &p.output)?)))
        .collect::<Result<Vec<_>>>()?;
    ProcessMatrix::new(op, parties)
}

/// Writes `<stem>.json` and `<stem>.txt` into `dir`.
pub fn save_process(dir: impl AsRef<Path>, stem: &str, w: &ProcessMatrix) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let txt = format!("{}.txt", stem);
    write_operator(dir.join(&txt), w.op(), Some(stem))?;
    let m = ProcessManifest {
        matrix: txt,
        parties: w
            .parties()
            .iter()
            .map(|p| PartySpec {
                name: p.name.clone(),
                input: p.input.as_ref().map(|l| l.name.clone()),
                output: p.output.as_ref().map(|l| l.name.clone()),
            })
            .collect(),
    };
    let json = dir.join(format!("{}.json", stem));
    std::fs::write(&json, serde_json::to_string_pretty(&m)?)?;
    Ok(json)
}

fn instrument_from(base: &Path, m: &InstrumentManifest) -> Result<Instrument> {
    let recs = read_records(resolve(base, &m.elements))?;
    if recs.len() != m.classical_inputs * m.outcomes {
        return Err(Error::Parse(format!(
            "instrument `{}` lists {} elements, expected {}",
            m.party,
            recs.len(),
            m.classical_inputs * m.outcomes
        )));
    }
    let first = &recs[0].operator;
    let lab = |n: &String| first.label(n).cloned().ok_or_else(|| Error::UnknownLabel(n.clone()));
    let qin = m.quantum_inputs.iter().map(lab).collect::<Result<Vec<_>>>()?;
    let input = m.input.as_ref().map(lab).transpose()?;
    let output = m.output.as_ref().map(lab).transpose()?;
    let ops: Vec<LabeledOperator> = recs.into_iter().map(|r| r.operator).collect();
    let rows = ops.chunks(m.outcomes).map(|c| c.to_vec()).collect();
    Instrument::new(&m.party, qin, input, output, rows)
}

pub fn load_instruments(path: impl AsRef<Path>) -> Result<BTreeMap<String, Instrument>> {
    let path = path.as_ref();
    let m: InstrumentSetManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let mut out = BTreeMap::new();
    for im in &m.instruments {
        out.insert(im.party.clone(), instrument_from(path, im)?);
    }
    Ok(out)
}

/// Writes `<stem>.json` plus one `<stem>_<party>.txt` per instrument.
pub fn save_instruments(dir: impl AsRef<Path>, stem: &str, set: &BTreeMap<String, Instrument>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let mut manifests = Vec::new();
    for (name, inst) in set {
        let file = format!("{}_{}.txt", stem, name);
        let mut recs = Vec::new();
        for (x, row) in inst.elements().iter().enumerate() {
            for (a, e) in row.iter().enumerate() {
                recs.push(NamedOperator {
                    name: Some(format!("{}[x={},a={}]", name, x, a)),
                    operator: e.clone(),
                });
            }
        }
        write_records(dir.join(&file), &recs)?;
        manifests.push(InstrumentManifest {
            party: name.clone(),
            quantum_inputs: inst.quantum_inputs().iter().map(|l| l.name.clone()).collect(),
            input: inst.input().map(|l| l.name.clone()),
            output: inst.output().map(|l| l.name.clone()),
            classical_inputs: inst.classical_inputs(),
            outcomes: inst.outcomes(),
            elements: file,
        });
    }
    let json = dir.join(format!("{}.json", stem));
    std::fs::write(&json, serde_json::to_string_pretty(&InstrumentSetManifest { instruments: manifests })?)?;
    Ok(json)
}
