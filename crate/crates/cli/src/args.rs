use std::path::{Path, PathBuf};
use std::sync::Arc;

use cayley_sieve::blocks::{DeltaPolicy, GeneratorOptions, GeneratorSystem, StepWeighting};
use cayley_sieve::harness::{BRule, OutputFormat};
use cayley_sieve::instances::{GridScale, InstanceMode, InstanceSpec, Partition};
use cayley_sieve::io::{read_json, BlockSystemDoc, GeneratorSystemDoc};
use cayley_sieve::{Instance, Result, SieveError};
use clap::{Args, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Coloring,
    Grid,
    Ap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionArg {
    Triples,
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Paper,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Uniform,
    Multiset,
}

impl From<WeightingArg> for StepWeighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Uniform => StepWeighting::Uniform,
            WeightingArg::Multiset => StepWeighting::Multiset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Strict,
    Permissive,
}

impl From<PolicyArg> for DeltaPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Strict => DeltaPolicy::Strict,
            PolicyArg::Permissive => DeltaPolicy::Permissive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

/// Instance selection: a JSON file, or a kind with its parameters.
#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// JSON instance description, or any block/generator system document that embeds one.
    #[arg(long, value_name = "FILE", conflicts_with = "kind")]
    pub instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Number of blocks.
    #[arg(long)]
    pub r: Option<u32>,
    /// Number of colors (coloring and ap).
    #[arg(long, default_value_t = 3)]
    pub c: u32,
    #[arg(long, value_enum, default_value = "triples")]
    pub partition: PartitionArg,
    /// Accept degenerate coloring instances (R < 3, blocks without triangles).
    #[arg(long)]
    pub permissive: bool,
    /// Color 0 does not count for monochromatic triangles.
    #[arg(long)]
    pub no_zero_color: bool,
    #[arg(long, value_enum, default_value = "paper")]
    pub scale: ScaleArg,
    /// Increasing radii r_0 < r_1 < ... for the reduced grid scale.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub radii: Vec<i32>,
    /// Progression length.
    #[arg(long)]
    pub s: Option<u32>,
    /// Block spacing of the progression instance.
    #[arg(long)]
    pub q: Option<u32>,
}

impl InstanceArgs {
    pub fn given(&self) -> bool {
        self.instance.is_some() || self.kind.is_some()
    }

    pub fn spec(&self) -> Result<InstanceSpec> {
        if let Some(path) = &self.instance {
            return read_instance_file(path);
        }
        let kind = self
            .kind
            .ok_or_else(|| SieveError::Parameter("an instance is required: pass --instance or --kind".into()))?;
        let r = self.r.ok_or_else(|| SieveError::Parameter("--r is required with --kind".into()))?;
        Ok(match kind {
            Kind::Coloring => InstanceSpec::Coloring {
                r,
                c: self.c,
                partition: match self.partition {
                    PartitionArg::Triples => Partition::Triples,
                    PartitionArg::Triangular => Partition::Triangular,
                },
                mode: if self.permissive { InstanceMode::Permissive } else { InstanceMode::Strict },
                zero_is_color: !self.no_zero_color,
            },
            Kind::Grid => InstanceSpec::Grid {
                r,
                scale: match self.scale {
                    ScaleArg::Paper => GridScale::Paper,
                    ScaleArg::Reduced => GridScale::Reduced { radii: self.radii.clone() },
                },
            },
            Kind::Ap => {
                let s = self.s.ok_or_else(|| SieveError::Parameter("--s is required for ap".into()))?;
                InstanceSpec::Ap {
                    s,
                    q: self.q.unwrap_or(r),
                    c: self.c,
                    r,
                }
            }
        })
    }
}

fn read_instance_file(path: &Path) -> Result<InstanceSpec> {
    let value: serde_json::Value = read_json(path)?;
    let inner = if value.get("kind").is_some() {
        value
    } else {
        match value.get("instance") {
            Some(v) if !v.is_null() => v.clone(),
            _ => {
                return Err(SieveError::Parse(format!(
                    "{} holds no instance description",
                    path.display()
                )))
            }
        }
    };
    Ok(serde_json::from_value(inner)?)
}

/// Parameters of the sampled generating set.
#[derive(Debug, Clone, Default, Args)]
pub struct GeneratorArgs {
    /// Expansion parameter delta.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Explicit b_l per block.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["b_offset", "b_slope"])]
    pub b: Option<Vec<f64>>,
    /// b_l = offset + slope * l.
    #[arg(long, allow_hyphen_values = true)]
    pub b_offset: Option<f64>,
    #[arg(long)]
    pub b_slope: Option<f64>,
    /// Explicit generator count per block.
    #[arg(long, value_delimiter = ',')]
    pub kappa: Option<Vec<u64>>,
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
    /// `permissive` admits delta in (1/2, 1).
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
}

pub const DEFAULT_DELTA: f64 = 0.5;

impl GeneratorArgs {
    /// The b rule given on the command line, if any part of it was.
    pub fn b_rule(&self) -> Option<BRule> {
        if let Some(values) = &self.b {
            return Some(BRule::Explicit { values: values.clone() });
        }
        if self.b_offset.is_none() && self.b_slope.is_none() {
            return None;
        }
        Some(BRule::Linear {
            offset: self.b_offset.unwrap_or(0.0),
            slope: self.b_slope.unwrap_or(1.0),
        })
    }

    pub fn build(&self, instance: &Instance) -> Result<GeneratorSystem> {
        let bs = instance.system().clone();
        let b = self.b_rule().unwrap_or_default().values(bs.blocks().len())?;
        let options = GeneratorOptions {
            policy: self.policy.map(Into::into).unwrap_or_default(),
            weighting: self.weighting.map(Into::into).unwrap_or_default(),
            kappa_override: self.kappa.clone(),
        };
        GeneratorSystem::build(bs, self.delta.unwrap_or(DEFAULT_DELTA), &b, self.seed.unwrap_or(0), &options)
    }
}

/// A generator system from a saved document or built on the spot.
#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Generator system document written by `instance --generators`.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["instance", "kind"])]
    pub system: Option<PathBuf>,
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub generators: GeneratorArgs,
}

impl SystemArgs {
    /// Loads or builds the system. The instance is `None` only for documents
    /// that do not record one.
    pub fn load(&self) -> Result<(Option<Instance>, Arc<GeneratorSystem>)> {
        let Some(path) = &self.system else {
            let instance = Instance::build(&self.instance.spec()?)?;
            let gs = self.generators.build(&instance)?;
            return Ok((Some(instance), Arc::new(gs)));
        };
        let doc: GeneratorSystemDoc = read_json(path)?;
        let gs = doc.to_system()?;
        let instance = match &doc.blocks.instance {
            Some(spec) => {
                let instance = Instance::build(spec)?;
                let rebuilt = BlockSystemDoc::from_system(instance.system(), Some(spec.clone()));
                if rebuilt != doc.blocks {
                    return Err(SieveError::Structural(format!(
                        "{}: blocks differ from those of the recorded instance",
                        path.display()
                    )));
                }
                Some(instance)
            }
            None => None,
        };
        Ok((instance, Arc::new(gs)))
    }
}

/// Destination of a command's output.
#[derive(Debug, Clone, Default, Args)]
pub struct OutArgs {
    /// Output file; standard output when absent or `-`.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output encoding; inferred from the extension of --out when absent.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

impl OutArgs {
    pub fn path(&self) -> Option<&Path> {
        self.out.as_deref().filter(|p| p.as_os_str() != "-")
    }

    pub fn to_stdout(&self) -> bool {
        self.out.is_some() && self.path().is_none()
    }

    pub fn format(&self, default: OutputFormat) -> OutputFormat {
        match (self.format, self.path()) {
            (Some(f), _) => f.into(),
            (None, Some(path)) if path.extension().is_some() => OutputFormat::for_path(path),
            (None, _) => default,
        }
    }
}
