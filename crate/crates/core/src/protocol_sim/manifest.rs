//! JSON scenario manifests. Processes and instruments use their own
//! manifests; measurement families and shared states are text records.
//! Paths are relative to the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Link, NetworkScenario};
use crate::error::{Error, Result};
use crate::process::manifest::{load_instruments, load_process, save_instruments, save_process};
use crate::tensor_core::text::{read_operator, read_records, write_operator, write_records, NamedOperator};
use crate::tensor_core::{LabeledOperator, MeasurementFamily};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkManifest {
    pub preparer: String,
    pub party: String,
    /// Records ordered setting-major: (z=0,c=0), (z=0,c=1), ...
    pub measurement: String,
    pub settings: usize,
    pub outcomes: usize,
    pub shared: String,
    #[serde(default)]
    pub bell_settings: Vec<usize>,
    #[serde(default)]
    pub party_bell_settings: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub process: String,
    pub instruments: String,
    pub links: Vec<LinkManifest>,
    #[serde(default)]
    pub star: BTreeMap<String, usize>,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn load_family(path: &Path, settings: usize, outcomes: usize) -> Result<MeasurementFamily> {
    let recs = read_records(path)?;
    if recs.len() != settings * outcomes || recs.is_empty() {
        return Err(Error::Parse(format!(
            "{} lists {} elements, expected {}",
            path.display(),
            recs.len(),
            settings * outcomes
        )));
    }
    let label = match recs[0].operator.systems() {
        [l] => l.clone(),
        _ => return Err(Error::Shape(format!("{}: measurement elements must act on one system", path.display()))),
    };
    let ops: Vec<LabeledOperator> = recs.into_iter().map(|r| r.operator).collect();
    MeasurementFamily::new(label, ops.chunks(outcomes).map(|c| c.to_vec()).collect())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<NetworkScenario> {
    let path = path.as_ref();
    let m: ScenarioManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let links = m
        .links
        .iter()
        .map(|l| {
            Ok(Link {
                preparer: l.preparer.clone(),
                party: l.party.clone(),
                measurement: load_family(&resolve(path, &l.measurement), l.settings, l.outcomes)?,
                shared: read_operator(resolve(path, &l.shared))?,
                bell_settings: l.bell_settings.clone(),
                party_bell_settings: l.party_bell_settings.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkScenario {
        process: load_process(resolve(path, &m.process))?,
        instruments: load_instruments(resolve(path, &m.instruments))?,
        links,
        star: m.star,
    })
}

/// Writes `<stem>.json` with the process, instruments, measurements and
/// shared states alongside it.
pub fn save_scenario(dir: impl AsRef<Path>, stem: &str, scn: &NetworkScenario) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let process = save_process(dir, &format!("{}_process", stem), &scn.process)?;
    let instruments = save_instruments(dir, &format!("{}_instruments", stem), &scn.instruments)?;
    let name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    let mut links = Vec::new();
    for l in &scn.links {
        let meas = format!("{}_{}_measurement.txt", stem, l.preparer);
        let recs: Vec<NamedOperator> = (0..l.measurement.setting_count())
            .flat_map(|z| (0..l.measurement.outcome_count()).map(move |c| (z, c)))
            .map(|(z, c)| NamedOperator {
                name: Some(format!("{}[z={},c={}]", l.preparer, z, c)),
                operator: l.measurement.element(z, c).clone(),
            })
            .collect();
        write_records(dir.join(&meas), &recs)?;
        let shared = format!("{}_{}_shared.txt", stem, l.preparer);
        write_operator(dir.join(&shared), &l.shared, Some("shared"))?;
        links.push(LinkManifest {
            preparer: l.preparer.clone(),
            party: l.party.clone(),
            measurement: meas,
            settings: l.measurement.setting_count(),
            outcomes: l.measurement.outcome_count(),
            shared,
            bell_settings: l.bell_settings.clone(),
            party_bell_settings: l.party_bell_settings.clone(),
        });
    }
    let m = ScenarioManifest {
        process: name(&process),
        instruments: name(&instruments),
        links,
        star: scn.star.clone(),
    };
    let json = dir.join(format!("{}.json", stem));
    std::fs::write(&json, serde_json::to_string_pretty(&m)?)?;
    Ok(json)
}
