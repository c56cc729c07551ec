//! Experiment configuration files.
//!
//! Configurations are TOML documents. Sections may be written as tables or as
//! dotted keys (`solver.epsilon = 0.4`); unknown keys are rejected.
//!
//! ```toml
//! experiment = "benchmark-2d"
//!
//! [solver]
//! epsilon = 0.4
//! modes = 3
//! samples = 500
//! seed = 7
//! variant = "multi-modes"   # or "brute-force"
//!
//! [mesh]
//! domain = [0.0, 2.0, 0.0, 2.0]   # [lo, hi] in 1D
//! h = 0.1                         # or cells = 20
//!
//! [eta]
//! kind = "trig-eta"
//!
//! [source]
//! kind = "trig-source"
//! ```

use std::sync::Arc;

use mmmc::experiments::cells_for;
use mmmc::quadrature::QuadratureRule;
use mmmc::random_fields::{
    kl_decompose, CovarianceKernel, DeterministicField, KlFieldSpec, NoiseLaw, NystromOptions,
    RandomFieldSpec, TrigSeriesEta, TrigSeriesSource, ETA_STREAM, SOURCE_STREAM,
};
use mmmc::solver::{MeshSpec, ProblemInputs, SolverConfig, SolverVariant};
use mmmc::Domain;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub solver: SolverSection,
    pub mesh: MeshSection,
    #[serde(default)]
    pub background: BackgroundSection,
    pub eta: FieldSection,
    pub source: FieldSection,
    #[serde(default)]
    pub output: OutputSection,
    pub compare: Option<CompareSection>,
}

#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    MultiModes,
    BruteForce,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: f64,
    pub modes: usize,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    #[serde(default)]
    pub variant: Variant,
    /// Polynomial degree integrated exactly by the assembly rule.
    pub quadrature_degree: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub domain: Vec<f64>,
    pub cells: Option<usize>,
    /// Cell size; must divide the domain side.
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSection {
    pub a0: f64,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        Self { a0: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    #[default]
    Normal,
    Uniform,
}

impl From<Law> for NoiseLaw {
    fn from(l: Law) -> Self {
        match l {
            Law::Normal => NoiseLaw::StandardNormal,
            Law::Uniform => NoiseLaw::UnitUniform,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSection {
    Constant {
        value: f64,
    },
    ScalarUniform {
        lo: f64,
        hi: f64,
        stream: Option<u32>,
    },
    TrigEta {
        terms: Option<[usize; 2]>,
        decay: Option<f64>,
        base: Option<f64>,
        amplitude: Option<f64>,
        center: Option<[f64; 2]>,
        stream: Option<u32>,
    },
    TrigSource {
        terms: Option<[usize; 2]>,
        decay: Option<f64>,
        amplitude: Option<f64>,
        center: Option<[f64; 2]>,
        stream: Option<u32>,
    },
    Kl {
        power: u32,
        length: f64,
        k_max: usize,
        nodes: Option<usize>,
        correction: Option<bool>,
        law: Option<Law>,
        stream: Option<u32>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub epsilons: Vec<f64>,
    pub max_modes: usize,
    pub timing_modes: Option<usize>,
    pub warmup_samples: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn domain(&self) -> Result<Domain, String> {
        let d = &self.mesh.domain;
        let domain = match d.len() {
            2 => Domain::interval(d[0], d[1]),
            4 => Domain::rect(d[0], d[1], d[2], d[3]),
            n => return Err(format!("mesh.domain needs 2 or 4 numbers, got {n}")),
        };
        domain.map_err(|e| e.to_string())
    }

    pub fn mesh_spec(&self) -> Result<MeshSpec, String> {
        let domain = self.domain()?;
        let side = match domain {
            Domain::Interval1D { x_lo, x_hi } => x_hi - x_lo,
            Domain::Rect2D {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => {
                if ((x_hi - x_lo) - (y_hi - y_lo)).abs() > 1e-12 * (x_hi - x_lo) && self.mesh.h.is_some() {
                    return Err("mesh.h needs a square domain; use mesh.cells".into());
                }
                x_hi - x_lo
            }
        };
        let cells = match (self.mesh.cells, self.mesh.h) {
            (Some(c), None) => c,
            (None, Some(h)) => cells_for(side, h).map_err(|e| e.to_string())?,
            _ => return Err("set exactly one of mesh.cells and mesh.h".into()),
        };
        Ok(MeshSpec { domain, cells })
    }

    pub fn quadrature(&self, dim: usize) -> Result<Option<QuadratureRule>, String> {
        let Some(deg) = self.solver.quadrature_degree else {
            return Ok(None);
        };
        match dim {
            1 => Ok(Some(QuadratureRule::gauss_legendre((deg as usize).div_ceil(2).max(1)))),
            _ => match deg {
                0..=4 => Ok(Some(QuadratureRule::triangle_degree4())),
                5 | 6 => Ok(Some(QuadratureRule::triangle_degree6())),
                _ => Err(format!("no triangle rule of degree {deg}; use 4 or 6")),
            },
        }
    }

    /// Solver settings; `seed` and `workers` override the file when given.
    pub fn solver_config(&self, seed: Option<u64>, workers: Option<usize>) -> Result<SolverConfig, String> {
        let mesh = self.mesh_spec()?;
        let s = &self.solver;
        let mut c = SolverConfig::new(mesh, s.epsilon, s.modes, s.samples, seed.unwrap_or(s.seed));
        c.workers = workers.or(s.workers).unwrap_or(1);
        c.variant = match s.variant {
            Variant::MultiModes => SolverVariant::MultiModes,
            Variant::BruteForce => SolverVariant::BruteForce,
        };
        c.quadrature = self.quadrature(mesh.domain.dim())?;
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }

    pub fn inputs(&self) -> Result<ProblemInputs, String> {
        let domain = self.domain()?;
        if !(self.background.a0 > 0.0) {
            return Err(format!("background.a0 must be positive, got {}", self.background.a0));
        }
        Ok(ProblemInputs {
            a0: DeterministicField::Constant(self.background.a0),
            eta: self.eta.to_spec(ETA_STREAM, &domain, true)?,
            f: self.source.to_spec(SOURCE_STREAM, &domain, false)?,
        })
    }
}

impl FieldSection {
    fn to_spec(&self, default_stream: u32, domain: &Domain, is_eta: bool) -> Result<RandomFieldSpec, String> {
        let spec = match self {
            FieldSection::Constant { value } => RandomFieldSpec::constant(*value),
            FieldSection::ScalarUniform { lo, hi, stream } => {
                RandomFieldSpec::scalar_uniform(*lo, *hi, stream.unwrap_or(default_stream))
                    .map_err(|e| e.to_string())?
            }
            FieldSection::TrigEta {
                terms,
                decay,
                base,
                amplitude,
                center,
                stream,
            } => {
                let d = TrigSeriesEta::default();
                let [m_terms, n_terms] = terms.unwrap_or([d.m_terms, d.n_terms]);
                RandomFieldSpec::TrigSeriesEta2D {
                    series: TrigSeriesEta {
                        m_terms,
                        n_terms,
                        decay: decay.unwrap_or(d.decay),
                        base: base.unwrap_or(d.base),
                        amplitude: amplitude.unwrap_or(d.amplitude),
                        center: center.unwrap_or(d.center),
                    },
                    stream: stream.unwrap_or(default_stream),
                }
            }
            FieldSection::TrigSource {
                terms,
                decay,
                amplitude,
                center,
                stream,
            } => {
                let d = TrigSeriesSource::default();
                let [m_terms, n_terms] = terms.unwrap_or([d.m_terms, d.n_terms]);
                RandomFieldSpec::TrigSeriesF2D {
                    series: TrigSeriesSource {
                        m_terms,
                        n_terms,
                        decay: decay.unwrap_or(d.decay),
                        amplitude: amplitude.unwrap_or(d.amplitude),
                        center: center.unwrap_or(d.center),
                    },
                    stream: stream.unwrap_or(default_stream),
                }
            }
            FieldSection::Kl {
                power,
                length,
                k_max,
                nodes,
                correction,
                law,
                stream,
            } => {
                if !is_eta {
                    return Err("kind = \"kl\" is only supported for eta".into());
                }
                let kernel = CovarianceKernel::exp_abs(*power, *length).map_err(|e| e.to_string())?;
                let opts = NystromOptions {
                    nodes_per_dir: nodes.unwrap_or(if domain.dim() == 1 { 400 } else { 40 }),
                    k_max: *k_max,
                    correction: correction.unwrap_or(true),
                };
                let basis = kl_decompose(&kernel, domain, opts).map_err(|e| e.to_string())?;
                let spec = KlFieldSpec::new(
                    Arc::new(basis),
                    *k_max,
                    law.unwrap_or_default().into(),
                    stream.unwrap_or(default_stream),
                )
                .map_err(|e| e.to_string())?;
                RandomFieldSpec::Kl(spec)
            }
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
solver.epsilon = 0.3
solver.modes = 4
solver.samples = 10
mesh.domain = [0.0, 1.0]
mesh.h = 0.1
eta.kind = "scalar-uniform"
eta.lo = 0.0
eta.hi = 1.0
source = { kind = "scalar-uniform", lo = 0.0, hi = 1.0, stream = 1 }
"#;

    #[test]
    fn dotted_keys_parse() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let s = c.solver_config(None, None).unwrap();
        assert_eq!(s.mesh.cells, 10);
        assert_eq!(s.workers, 1);
        let inputs = c.inputs().unwrap();
        assert_eq!(inputs.eta.stream(), inputs.f.stream());
        let s = c.solver_config(Some(5), Some(3)).unwrap();
        assert_eq!((s.seed, s.workers), (5, 3));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{MINIMAL}\nsolver.epsilom = 0.1\n");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let bad = MINIMAL.replace("eta.hi = 1.0", "eta.hi = 1.0\neta.mean = 3.0");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn mesh_and_quadrature_checks() {
        let c = ExperimentConfig::parse(&MINIMAL.replace("mesh.h = 0.1", "mesh.h = 0.3")).unwrap();
        assert!(c.mesh_spec().is_err());
        let c = ExperimentConfig::parse(&MINIMAL.replace("mesh.h = 0.1", "mesh.cells = 7")).unwrap();
        assert_eq!(c.mesh_spec().unwrap().cells, 7);
        let c = ExperimentConfig::parse(&format!("{MINIMAL}solver.quadrature_degree = 9\n")).unwrap();
        assert_eq!(c.quadrature(1).unwrap().unwrap().len(), 5);
        assert!(c.quadrature(2).is_err());
    }

    #[test]
    fn kl_only_for_eta() {
        let text = MINIMAL.replace(
            "source = { kind = \"scalar-uniform\", lo = 0.0, hi = 1.0, stream = 1 }",
            "source = { kind = \"kl\", power = 1, length = 0.5, k_max = 3 }",
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        assert!(c.inputs().is_err());
    }
}
