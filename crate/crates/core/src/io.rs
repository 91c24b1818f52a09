//! Versioned JSON documents for block systems and generator systems.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::blocks::{BlockSystem, DeltaPolicy, GeneratorSystem, StepWeighting};
use crate::error::{Result, SieveError};
use crate::instances::InstanceSpec;
use crate::labeling::{Block, GroundSet, Labeling, Site};

pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDoc {
    pub label: u32,
    pub sites: Vec<String>,
}

/// Ground set, modulus and blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSystemDoc {
    pub version: u32,
    #[serde(default)]
    pub instance: Option<InstanceSpec>,
    pub modulus: u32,
    pub ground: Vec<String>,
    pub blocks: Vec<BlockDoc>,
}

impl BlockSystemDoc {
    pub fn from_system(bs: &BlockSystem, instance: Option<InstanceSpec>) -> Self {
        let ground = bs.ground();
        BlockSystemDoc {
            version: DOCUMENT_VERSION,
            instance,
            modulus: bs.modulus(),
            ground: ground.sites().iter().map(Site::to_string).collect(),
            blocks: bs
                .blocks()
                .iter()
                .map(|b| BlockDoc {
                    label: b.label(),
                    sites: b.sites().iter().map(|&s| ground.site(s).to_string()).collect(),
                })
                .collect(),
        }
    }

    pub fn to_system(&self) -> Result<BlockSystem> {
        check_version(self.version)?;
        let sites = self
            .ground
            .iter()
            .map(|s| s.parse::<Site>())
            .collect::<Result<Vec<_>>>()?;
        let ground = Arc::new(GroundSet::new(sites)?);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, doc) in self.blocks.iter().enumerate() {
            if doc.label != i as u32 + 1 {
                return Err(SieveError::Parse(format!("block {} carries label {}", i + 1, doc.label)));
            }
            let sites = doc.sites.iter().map(|s| s.parse::<Site>()).collect::<Result<Vec<_>>>()?;
            blocks.push(Block::from_sites(doc.label, &sites, &ground)?);
        }
        BlockSystem::new(ground, self.modulus, blocks)
    }
}

/// A generator system with everything needed to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSystemDoc {
    #[serde(flatten)]
    pub blocks: BlockSystemDoc,
    pub delta: f64,
    pub policy: DeltaPolicy,
    pub b: Vec<f64>,
    pub kappa: Vec<u64>,
    pub seed: u64,
    pub weighting: StepWeighting,
    /// Raw draws per block, in labeling text form.
    pub samples: Vec<Vec<String>>,
    /// The symmetrized set `S`, sorted, identity first.
    pub elements: Vec<String>,
    pub step_distribution: Vec<f64>,
    pub c0: f64,
}

impl GeneratorSystemDoc {
    pub fn from_system(gs: &GeneratorSystem, instance: Option<InstanceSpec>) -> Self {
        let bs = gs.block_system();
        let ground = bs.ground();
        let r = bs.blocks().len() as u32;
        GeneratorSystemDoc {
            blocks: BlockSystemDoc::from_system(bs, instance),
            delta: gs.delta(),
            policy: gs.policy(),
            b: gs.b().to_vec(),
            kappa: gs.kappa().to_vec(),
            seed: gs.seed(),
            weighting: gs.weighting(),
            samples: (1..=r)
                .map(|l| {
                    gs.samples(l)
                        .expect("label in range")
                        .iter()
                        .map(|s| s.to_text(ground))
                        .collect()
                })
                .collect(),
            elements: gs.elements().iter().map(|s| s.to_text(ground)).collect(),
            step_distribution: gs.step_distribution().to_vec(),
            c0: gs.c0(),
        }
    }

    pub fn to_system(&self) -> Result<GeneratorSystem> {
        let bs = Arc::new(self.blocks.to_system()?);
        let ground = bs.ground().clone();
        let samples = self
            .samples
            .iter()
            .map(|draws| draws.iter().map(|t| Labeling::parse(t, &ground)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        if self.kappa.len() != samples.len() || self.kappa.iter().zip(&samples).any(|(&k, d)| k != d.len() as u64) {
            return Err(SieveError::Parse("kappa does not match the stored draws".into()));
        }
        let gs = GeneratorSystem::assemble(
            bs,
            self.delta,
            self.policy,
            self.b.clone(),
            self.kappa.clone(),
            self.seed,
            self.weighting,
            samples,
        )?;
        let elements = self
            .elements
            .iter()
            .map(|t| Labeling::parse(t, &ground))
            .collect::<Result<Vec<_>>>()?;
        if elements != gs.elements() {
            return Err(SieveError::Parse("stored S differs from the set rebuilt from the draws".into()));
        }
        if self.step_distribution == gs.step_distribution() {
            Ok(gs)
        } else {
            gs.with_step_distribution(self.step_distribution.clone())
        }
    }
}

fn check_version(version: u32) -> Result<()> {
    if version != DOCUMENT_VERSION {
        return Err(SieveError::Parse(format!(
            "document version {version}, expected {DOCUMENT_VERSION}"
        )));
    }
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| SieveError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| SieveError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::GeneratorOptions;
    use crate::instances::{Instance, InstanceMode, Partition};

    fn coloring() -> (InstanceSpec, Instance) {
        let spec = InstanceSpec::Coloring {
            r: 3,
            c: 3,
            partition: Partition::Triples,
            mode: InstanceMode::Strict,
            zero_is_color: true,
        };
        let inst = Instance::build(&spec).unwrap();
        (spec, inst)
    }

    #[test]
    fn block_system_round_trip() {
        let (spec, inst) = coloring();
        let doc = BlockSystemDoc::from_system(inst.system(), Some(spec));
        let text = serde_json::to_string(&doc).unwrap();
        let back: BlockSystemDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        let bs = back.to_system().unwrap();
        assert_eq!(bs.blocks(), inst.system().blocks());
    }

    #[test]
    fn generator_system_round_trip() {
        let (spec, inst) = coloring();
        let gs = GeneratorSystem::build(inst.system().clone(), 0.5, &[1.0, 2.0, 3.0], 9, &GeneratorOptions::default())
            .unwrap();
        let doc = GeneratorSystemDoc::from_system(&gs, Some(spec));
        let text = serde_json::to_string_pretty(&doc).unwrap();
        let back: GeneratorSystemDoc = serde_json::from_str(&text).unwrap();
        let rebuilt = back.to_system().unwrap();
        assert_eq!(rebuilt.elements(), gs.elements());
        assert_eq!(rebuilt.step_distribution(), gs.step_distribution());
        assert_eq!(rebuilt.kappa(), gs.kappa());
        assert_eq!(GeneratorSystemDoc::from_system(&rebuilt, back.blocks.instance.clone()), doc);
    }

    #[test]
    fn rejects_wrong_version_and_tampered_set() {
        let (_, inst) = coloring();
        let mut doc = BlockSystemDoc::from_system(inst.system(), None);
        doc.version = 7;
        assert!(doc.to_system().is_err());
        let gs = GeneratorSystem::build(inst.system().clone(), 0.5, &[1.0, 1.0, 1.0], 2, &GeneratorOptions::default())
            .unwrap();
        let mut doc = GeneratorSystemDoc::from_system(&gs, None);
        doc.elements.pop();
        assert!(doc.to_system().is_err());
    }

    #[test]
    fn file_round_trip() {
        let (spec, inst) = coloring();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bs.json");
        let doc = BlockSystemDoc::from_system(inst.system(), Some(spec));
        write_json(&doc, &path).unwrap();
        assert_eq!(read_json::<BlockSystemDoc>(&path).unwrap(), doc);
        assert!(matches!(
            read_json::<BlockSystemDoc>(&dir.path().join("missing.json")),
            Err(SieveError::Io { .. })
        ));
    }
}
