//! Experiment plan files (TOML).
//!
//! A plan describes one market and everything needed to solve, sweep or
//! simulate it. Unknown keys are rejected, and every validation error names
//! the offending field by its dotted path (e.g. `design.table`).
//!
//! ```toml
//! schema_version = 1
//!
//! [box]
//! lower = [1.0, 1.0]
//! upper = [9.0, 9.0]
//!
//! [demand]
//! model = "linear"
//! a = [100.0, 100.0]
//! b = [[10.0, 4.0], [4.0, 10.0]]
//!
//! [design]
//! kind = "independent"
//! q = [0.5, 0.5]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::demand::{DemandSystem, NoiseKind, NoiseSpec, PriceBox};
use crate::design::{ConjectureMatrix, DesignSchedule, DesignSpec, ExperimentDesign};
use crate::equilibrium::SolverOptions;
use crate::error::{Error, Result};
use crate::harness::{ExperimentPlan, Target, DEFAULT_RESAMPLES, DEFAULT_TAIL_FRACTION};
use crate::sldl::{BatchSchedule, DeltaSchedule, SldlConfig, DEFAULT_SLOPE_TOLERANCE};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub schema_version: u32,
    #[serde(rename = "box")]
    pub price_box: BoxSection,
    pub demand: DemandSection,
    pub noise: Option<NoiseSection>,
    pub design: Option<DesignSection>,
    pub design_sweep: Option<DesignSweepSection>,
    pub conjecture: Option<ConjectureSection>,
    pub sweep: Option<SweepSection>,
    pub sldl: Option<SldlSection>,
    pub solver: Option<SolverSection>,
    pub harness: Option<HarnessSection>,
    pub gmv: Option<GmvSection>,
    pub outputs: Option<OutputsSection>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSection {
    Linear { a: Vec<f64>, b: Vec<Vec<f64>> },
    Mnl { a: Vec<f64>, b: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChoice {
    BoundedUniform,
    Gaussian,
    /// Noiseless demand.
    None,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseChoice,
    /// Defaults to a bounded scale derived from the demand scan.
    pub sigma: Option<Vec<f64>>,
    pub correlation: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSection {
    Independent {
        q: Vec<f64>,
    },
    /// With probability `rho` all sellers share one coin with bias `q`;
    /// otherwise each flips independently with bias `q`.
    Mixture {
        rho: f64,
        q: f64,
    },
    /// Outcome masses keyed by bitstring, seller 0 first.
    Table {
        table: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSweepSection {
    pub rho: Vec<f64>,
    pub q: f64,
    /// Also run the replications at each `rho`.
    #[serde(default)]
    pub simulate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjectureSource {
    #[default]
    Zero,
    /// Induced by the plan's design.
    Design,
    Matrix,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConjectureSection {
    #[serde(default)]
    pub source: ConjectureSource,
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Uniform off-diagonal levels.
    pub levels: Option<Vec<f64>>,
    /// Explicit conjecture matrices.
    pub path: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SldlSection {
    pub u: Vec<f64>,
    pub initial_price: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    pub slope_tolerance: Option<f64>,
    #[serde(default)]
    pub record_periods: bool,
    pub batches: BatchSchedule,
    pub delta: DeltaSchedule,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub foc_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub require_contraction: Option<bool>,
    pub grid_resolution: Option<usize>,
    /// Damping used by `solve`/`sweep`/`check` when no `[sldl]` section exists.
    pub u: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSection {
    Nash,
    CvFromDesign,
    Explicit { price: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSection {
    pub replications: usize,
    pub target: Option<TargetSection>,
    pub tail_fraction: Option<f64>,
    pub bootstrap_resamples: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GmvSection {
    pub grid_resolution: Option<usize>,
    pub refine_iters: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub dir: Option<String>,
    pub format: Option<OutputFormat>,
}

/// A parsed and validated plan.
#[derive(Debug, Clone)]
pub struct Plan {
    pub file: PlanFile,
    pub demand: DemandSystem,
    pub noise: Option<NoiseSpec>,
    pub design: Option<ExperimentDesign>,
    pub solver: SolverOptions,
    /// Damping for fixed-point work: `sldl.u`, else `solver.u`, else 0.5.
    pub u: Vec<f64>,
    pub sldl: Option<SldlConfig>,
}

fn matrix(rows: &[Vec<f64>], n: usize, field: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::validation(field, format!("expected a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_len(v: &[f64], n: usize, field: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::validation(
            field,
            format!("expected {n} entries (one per seller), got {}", v.len()),
        ));
    }
    Ok(())
}

fn toml_error(e: toml::de::Error) -> Error {
    Error::validation(
        "plan",
        e.message().to_string() + &e.span().map(|s| format!(" (at byte {})", s.start)).unwrap_or_default(),
    )
}

impl Plan {
    pub fn load(path: &Path) -> Result<(Plan, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| Error::validation("plan", "file is not UTF-8"))?;
        Ok((Plan::from_toml(&text)?, bytes))
    }

    pub fn from_toml(text: &str) -> Result<Plan> {
        let file: PlanFile = toml::from_str(text).map_err(toml_error)?;
        Plan::from_file(file)
    }

    pub fn from_file(file: PlanFile) -> Result<Plan> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    file.schema_version
                ),
            ));
        }
        let price_box = PriceBox::new(file.price_box.lower.clone(), file.price_box.upper.clone())?;
        let n = price_box.n();
        let demand = match &file.demand {
            DemandSection::Linear { a, b } => DemandSystem::linear(a.clone(), matrix(b, n, "demand.b")?, price_box)?,
            DemandSection::Mnl { a, b } => DemandSystem::mnl(a.clone(), b.clone(), price_box)?,
        };

        let noise = match &file.noise {
            Some(NoiseSection {
                kind: NoiseChoice::None,
                ..
            }) => None,
            Some(s) => {
                let kind = match s.kind {
                    NoiseChoice::Gaussian => NoiseKind::Gaussian,
                    _ => NoiseKind::BoundedUniform,
                };
                let correlation = s
                    .correlation
                    .as_ref()
                    .map(|c| matrix(c, n, "noise.correlation"))
                    .transpose()?;
                let sigma = match &s.sigma {
                    Some(sig) => {
                        check_len(sig, n, "noise.sigma")?;
                        sig.clone()
                    }
                    None => NoiseSpec::default_for(&demand.scan_bounds(16)?, n)?.sigma().to_vec(),
                };
                Some(NoiseSpec::new(kind, sigma, correlation)?)
            }
            None => Some(NoiseSpec::default_for(&demand.scan_bounds(16)?, n)?),
        };

        let design = file
            .design
            .as_ref()
            .map(|d| build_design(d, n))
            .transpose()
            .map_err(|e| e.under("design"))?;
        if let Some(s) = &file.design_sweep {
            for (k, &rho) in s.rho.iter().enumerate() {
                ExperimentDesign::mixture(n, rho, s.q).map_err(|e| match e {
                    Error::Validation { field, message } if field == "rho" => {
                        Error::validation(format!("design_sweep.rho[{k}]"), message)
                    }
                    other => other.under("design_sweep"),
                })?;
            }
        }

        let sec = file.solver.clone().unwrap_or_default();
        let defaults = SolverOptions::default();
        let solver = SolverOptions {
            tol: sec.tol.unwrap_or(defaults.tol),
            foc_tol: sec.foc_tol.unwrap_or(defaults.foc_tol),
            max_iter: sec.max_iter.unwrap_or(defaults.max_iter),
            require_contraction: sec.require_contraction.unwrap_or(defaults.require_contraction),
            grid_resolution: sec
                .grid_resolution
                .unwrap_or_else(|| crate::demand::default_grid_resolution(n)),
        };
        if !(solver.tol > 0.0 && solver.foc_tol > 0.0) {
            return Err(Error::validation("solver.tol", "tolerances must be positive"));
        }
        if solver.grid_resolution < 2 {
            return Err(Error::validation("solver.grid_resolution", "must be at least 2"));
        }

        let sldl = file
            .sldl
            .as_ref()
            .map(|s| {
                check_len(&s.u, n, "sldl.u")?;
                check_len(&s.initial_price, n, "sldl.initial_price")?;
                let cfg = SldlConfig {
                    u: s.u.clone(),
                    initial_price: s.initial_price.clone(),
                    batches: s.batches.clone(),
                    delta: s.delta.clone(),
                    slope_tolerance: s.slope_tolerance.unwrap_or(DEFAULT_SLOPE_TOLERANCE),
                    seed: s.seed,
                    record_periods: s.record_periods,
                };
                cfg.validate(demand.price_box())?;
                Ok::<_, Error>(cfg)
            })
            .transpose()?;

        let u = match (&sldl, &sec.u) {
            (Some(cfg), _) => cfg.u.clone(),
            (None, Some(u)) => {
                check_len(u, n, "solver.u")?;
                u.clone()
            }
            (None, None) => vec![0.5; n],
        };
        crate::equilibrium::check_rates(&u, n).map_err(|e| e.under("solver"))?;

        if let Some(h) = &file.harness {
            if h.replications == 0 {
                return Err(Error::validation("harness.replications", "must be at least 1"));
            }
            if let Some(TargetSection::Explicit { price }) = &h.target {
                check_len(price, n, "harness.target.price")?;
            }
            if let Some(t) = h.tail_fraction {
                if !(t > 0.0 && t <= 1.0) {
                    return Err(Error::validation("harness.tail_fraction", "must lie in (0, 1]"));
                }
            }
        }
        if let Some(c) = &file.conjecture {
            match (c.source, &c.matrix) {
                (ConjectureSource::Matrix, None) => {
                    return Err(Error::validation(
                        "conjecture.matrix",
                        "required when source = \"matrix\"",
                    ));
                }
                (ConjectureSource::Matrix, Some(m)) => {
                    let a =
                        ConjectureMatrix::new(matrix(m, n, "conjecture.matrix")?).map_err(|e| e.under("conjecture"))?;
                    if !a.within_unit_bounds() {
                        return Err(Error::validation("conjecture.matrix", "entries must lie in [-1, 1]"));
                    }
                }
                (ConjectureSource::Design, _) if design.is_none() => {
                    return Err(Error::validation(
                        "conjecture.source",
                        "\"design\" needs a [design] section",
                    ));
                }
                _ => {}
            }
        }
        if let Some(s) = &file.sweep {
            if s.levels.is_some() == s.path.is_some() {
                return Err(Error::validation("sweep", "give exactly one of `levels` or `path`"));
            }
            if let Some(path) = &s.path {
                for (k, m) in path.iter().enumerate() {
                    ConjectureMatrix::new(matrix(m, n, &format!("sweep.path[{k}]"))?)
                        .map_err(|e| e.under(&format!("sweep.path[{k}]")))?;
                }
            }
        }

        Ok(Plan {
            file,
            demand,
            noise,
            design,
            solver,
            u,
            sldl,
        })
    }

    pub fn n(&self) -> usize {
        self.demand.n()
    }

    /// Conjecture for `solve` and `check`.
    pub fn conjecture(&self) -> Result<ConjectureMatrix> {
        let n = self.n();
        match self.file.conjecture.as_ref().map(|c| (c.source, &c.matrix)) {
            None | Some((ConjectureSource::Zero, _)) => Ok(ConjectureMatrix::zeros(n)),
            Some((ConjectureSource::Design, _)) => self
                .design
                .as_ref()
                .ok_or_else(|| Error::validation("conjecture.source", "\"design\" needs a [design] section"))?
                .conjecture_matrix(None),
            Some((ConjectureSource::Matrix, m)) => {
                let m = m
                    .as_ref()
                    .ok_or_else(|| Error::validation("conjecture.matrix", "missing"))?;
                ConjectureMatrix::new(matrix(m, n, "conjecture.matrix")?)
            }
        }
    }

    /// Conjecture path for `sweep` when no `[design_sweep]` is given.
    pub fn conjecture_path(&self) -> Result<Vec<ConjectureMatrix>> {
        let n = self.n();
        let s = self
            .file
            .sweep
            .as_ref()
            .ok_or_else(|| Error::validation("sweep", "plan has neither [sweep] nor [design_sweep]"))?;
        match (&s.levels, &s.path) {
            (Some(levels), None) => Ok(levels.iter().map(|&v| ConjectureMatrix::uniform(n, v)).collect()),
            (None, Some(path)) => path
                .iter()
                .enumerate()
                .map(|(k, m)| ConjectureMatrix::new(matrix(m, n, &format!("sweep.path[{k}]"))?))
                .collect(),
            _ => Err(Error::validation("sweep", "give exactly one of `levels` or `path`")),
        }
    }

    pub fn replications(&self) -> usize {
        self.file.harness.as_ref().map_or(1, |h| h.replications)
    }

    pub fn tail_fraction(&self) -> f64 {
        self.file
            .harness
            .as_ref()
            .and_then(|h| h.tail_fraction)
            .unwrap_or(DEFAULT_TAIL_FRACTION)
    }

    pub fn bootstrap_resamples(&self) -> usize {
        self.file
            .harness
            .as_ref()
            .and_then(|h| h.bootstrap_resamples)
            .unwrap_or(DEFAULT_RESAMPLES)
    }

    /// Target declared in `[harness]`, if any.
    pub fn declared_target(&self) -> Option<Target> {
        self.file
            .harness
            .as_ref()
            .and_then(|h| h.target.as_ref())
            .map(|t| match t {
                TargetSection::Nash => Target::Nash,
                TargetSection::CvFromDesign => Target::CvFromDesign,
                TargetSection::Explicit { price } => Target::Explicit { price: price.clone() },
            })
    }

    /// Harness plan; requires `[sldl]` and, for a fixed design, `[design]`.
    pub fn experiment(&self) -> Result<ExperimentPlan> {
        let sldl = self
            .sldl
            .clone()
            .ok_or_else(|| Error::validation("sldl", "section required for simulation"))?;
        let design = match (&self.design, &self.file.design_sweep) {
            (Some(d), _) => d.clone(),
            // A sweep-only plan simulates its first rho by default.
            (None, Some(s)) if !s.rho.is_empty() => ExperimentDesign::mixture(self.n(), s.rho[0], s.q)?,
            _ => return Err(Error::validation("design", "section required for simulation")),
        };
        Ok(ExperimentPlan {
            demand: self.demand.clone(),
            noise: self.noise.clone(),
            designs: DesignSchedule::constant(design),
            sldl,
            replications: self.replications(),
            target: self.declared_target().unwrap_or(Target::Nash),
            solver: self.solver,
        })
    }

    pub fn gmv_settings(&self) -> (usize, usize) {
        let g = self.file.gmv.as_ref();
        (
            g.and_then(|g| g.grid_resolution).unwrap_or(65),
            g.and_then(|g| g.refine_iters).unwrap_or(200),
        )
    }

    pub fn seed(&self) -> u64 {
        self.sldl.as_ref().map_or(0, |s| s.seed)
    }
}

fn build_design(d: &DesignSection, n: usize) -> Result<ExperimentDesign> {
    let design = match d {
        DesignSection::Independent { q } => {
            check_len(q, n, "q")?;
            ExperimentDesign::build(&DesignSpec::Independent { q: q.clone() })?
        }
        DesignSection::Mixture { rho, q } => ExperimentDesign::mixture(n, *rho, *q)?,
        DesignSection::Table { table } => {
            ExperimentDesign::from_bitstrings(table.iter().map(|(k, v)| (k.as_str(), *v)))?
        }
    };
    if design.n() != n {
        return Err(Error::validation(
            "table",
            format!("outcomes cover {} sellers, the market has {n}", design.n()),
        ));
    }
    Ok(design)
}
