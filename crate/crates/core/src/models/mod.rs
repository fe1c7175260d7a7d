//! Model specifications and the built-in model zoo.
//!
//! A [`ModelSpec`] is the `model` object of a JSON config. Matrices are
//! nested arrays of `[re, im]` pairs. Rates, coefficients and zoo
//! parameters are [`RateExpr`]s: a number, an expression string in `t`, or
//! the name of an entry in `parameters`.
//!
//! ```json
//! {
//!   "kind": "lindblad_terms",
//!   "dim": 2,
//!   "parameters": { "gamma": "cos(t)" },
//!   "matrices": { "L": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]] },
//!   "hamiltonian": [{ "coeff": 0.5, "matrix": "sigma_z" }],
//!   "channels": [{ "rate": "gamma", "operator": "L" }],
//!   "grid": { "t0": 0, "t1": "2*pi", "steps": 2000 }
//! }
//! ```
//!
//! Built-in matrix names: `identity` for any dimension, and `sigma_x`,
//! `sigma_y`, `sigma_z`, `sigma_plus`, `sigma_minus` for `dim = 2`.

pub mod zoo;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_memory_kernel, MapFamily, MemoryKernelSpec, TimeGrid};
use crate::error::{Error, Result};
use crate::expr::RateExpr;
use crate::generator::{
    transfer_from_lindblad, transfer_from_terms, GeneratorTerms, LindbladTerms, TransferMatrix,
};
use crate::linalg::{self, CMat, C64};
use crate::measures::{FnSource, GeneratorSource};
use crate::policy::NumericPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LindbladTerms,
    GeneratorTerms,
    PaperExample,
    Dephasing,
    JcAmplitudeDamping,
    MemoryKernelDephasing,
    MapFamilyFile,
}

/// Complex matrix as rows of `[re, im]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub Vec<Vec<[f64; 2]>>);

impl MatrixSpec {
    pub fn to_matrix(&self, name: &str) -> Result<CMat> {
        let n = self.0.len();
        if n == 0 || self.0.iter().any(|row| row.len() != n) {
            return Err(Error::Config(format!("matrix `{name}` is not square")));
        }
        Ok(CMat::from_fn(n, n, |i, j| {
            let [re, im] = self.0[i][j];
            C64::new(re, im)
        }))
    }

    pub fn from_matrix(m: &CMat) -> Self {
        MatrixSpec(
            (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .map(|j| [m[(i, j)].re, m[(i, j)].im])
                        .collect()
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t0: RateExpr,
    pub t1: RateExpr,
    /// Number of intervals; the grid has `steps + 1` points.
    pub steps: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        let t0 = constant(&self.t0, "grid.t0")?;
        let t1 = constant(&self.t1, "grid.t1")?;
        TimeGrid::uniform(t0, t1, self.steps)
    }
}

/// A number, the name of a parameter, or an expression in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateRef {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedMatrix {
    #[serde(default = "one")]
    pub coeff: RateRef,
    pub matrix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub rate: RateRef,
    pub operator: String,
}

/// One `coeff(t)·A ρ B†` term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default = "one")]
    pub coeff: RateRef,
    pub a: String,
    pub b: String,
}

fn one() -> RateRef {
    RateRef::Num(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub parameters: BTreeMap<String, RateExpr>,
    #[serde(default)]
    pub matrices: BTreeMap<String, MatrixSpec>,
    /// `lindblad_terms`: Hamiltonian as a sum of weighted matrices.
    #[serde(default)]
    pub hamiltonian: Vec<WeightedMatrix>,
    /// `lindblad_terms`: dissipative channels.
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    /// `lindblad_terms`: rates multiply `2LρL† − {L†L, ρ}` instead of the
    /// standard dissipator.
    #[serde(default)]
    pub legacy_halved_rates: bool,
    /// `generator_terms`: raw terms.
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    /// `map_family_file`: path of a [`MapFamilyFile`], relative to the config.
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Required for every kind except `map_family_file`.
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

/// Sampled maps on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFamilyFile {
    pub times: Vec<f64>,
    pub maps: Vec<MatrixSpec>,
}

pub type Provider = Box<dyn Fn(f64) -> Result<TransferMatrix> + Send + Sync>;

/// A built model: either a generator as a function of time, or sampled maps.
pub enum Model {
    Generator(FnSource<Provider>),
    Maps(MapFamily),
}

impl Model {
    pub fn dim(&self) -> usize {
        self.source().dim()
    }

    pub fn source(&self) -> &dyn GeneratorSource {
        match self {
            Model::Generator(s) => s,
            Model::Maps(f) => f,
        }
    }

    /// Grid fixed by the model itself (map families).
    pub fn grid(&self) -> Option<&TimeGrid> {
        match self {
            Model::Generator(_) => None,
            Model::Maps(f) => Some(f.grid()),
        }
    }
}

fn constant(e: &RateExpr, what: &str) -> Result<f64> {
    if !e.is_constant() {
        return Err(Error::Config(format!("{what} must not depend on t")));
    }
    Ok(e.eval(0.0)?)
}

struct Resolver<'a> {
    spec: &'a ModelSpec,
    dim: usize,
}

impl Resolver<'_> {
    fn matrix(&self, name: &str) -> Result<CMat> {
        let m = if let Some(spec) = self.spec.matrices.get(name) {
            spec.to_matrix(name)?
        } else {
            builtin(name, self.dim)
                .ok_or_else(|| Error::Config(format!("unknown matrix `{name}`")))?
        };
        if m.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.nrows(),
            });
        }
        Ok(m)
    }

    fn param(&self, name: &str) -> Result<RateExpr> {
        self.spec
            .parameters
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    fn scalar(&self, name: &str) -> Result<f64> {
        constant(&self.param(name)?, &format!("parameter `{name}`"))
    }
}

fn builtin(name: &str, dim: usize) -> Option<CMat> {
    match (name, dim) {
        ("identity", _) => Some(linalg::identity(dim)),
        ("sigma_x", 2) => Some(linalg::sigma_x()),
        ("sigma_y", 2) => Some(linalg::sigma_y()),
        ("sigma_z", 2) => Some(linalg::sigma_z()),
        ("sigma_plus", 2) => Some(linalg::sigma_plus()),
        ("sigma_minus", 2) => Some(linalg::sigma_minus()),
        _ => None,
    }
}

#[derive(Clone)]
struct Rate(RateExpr);

impl Rate {
    fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.0.eval(t)?)
    }
}

impl ModelSpec {
    pub fn dim(&self) -> Result<usize> {
        let qubit = matches!(
            self.kind,
            ModelKind::PaperExample
                | ModelKind::Dephasing
                | ModelKind::JcAmplitudeDamping
                | ModelKind::MemoryKernelDephasing
        );
        match (self.dim, qubit) {
            (Some(d), _) if d < 2 => Err(Error::InvalidDimension(d)),
            (Some(d), true) if d != 2 => Err(Error::DimensionMismatch {
                expected: 2,
                found: d,
            }),
            (Some(d), _) => Ok(d),
            (None, true) => Ok(2),
            (None, false) => Err(Error::Config(format!("{:?} models need `dim`", self.kind))),
        }
    }

    fn check_names(&self) -> Result<()> {
        for name in self.parameters.keys().chain(self.matrices.keys()) {
            let reserved = matches!(name.as_str(), "t" | "pi")
                || crate::expr::parse_rate_expr(&format!("{name}(1)")).is_ok()
                || crate::expr::parse_rate_expr(&format!("{name}(1,1)")).is_ok();
            if reserved || name.is_empty() {
                return Err(Error::Config(format!("`{name}` is a reserved name")));
            }
        }
        for name in self.matrices.keys() {
            if builtin(name, 2).is_some() {
                return Err(Error::Config(format!("matrix `{name}` shadows a built-in")));
            }
        }
        Ok(())
    }

    fn resolve_rate(&self, r: &RateRef) -> Result<Rate> {
        match r {
            RateRef::Num(x) => Ok(Rate(RateExpr::Num(*x))),
            RateRef::Text(s) => match self.parameters.get(s.trim()) {
                Some(e) => Ok(Rate(e.clone())),
                None => Ok(Rate(crate::expr::parse_rate_expr(s)?)),
            },
        }
    }
}

/// Validates `spec` and builds its generator provider or map family.
/// Relative map-file paths are resolved against `base_dir`.
pub fn build_model(spec: &ModelSpec, base_dir: &Path, policy: &NumericPolicy) -> Result<Model> {
    spec.check_names()?;
    let dim = spec.dim()?;
    let r = Resolver { spec, dim };
    let grid = || -> Result<TimeGrid> {
        spec.grid
            .as_ref()
            .ok_or_else(|| Error::Config("missing `grid`".into()))?
            .build()
    };
    let generator = |f: Provider| Model::Generator(FnSource::new(dim, f));

    Ok(match spec.kind {
        ModelKind::LindbladTerms => {
            let h: Vec<(Rate, CMat)> = spec
                .hamiltonian
                .iter()
                .map(|w| Ok((spec.resolve_rate(&w.coeff)?, r.matrix(&w.matrix)?)))
                .collect::<Result<_>>()?;
            let ch: Vec<(Rate, CMat)> = spec
                .channels
                .iter()
                .map(|c| Ok((spec.resolve_rate(&c.rate)?, r.matrix(&c.operator)?)))
                .collect::<Result<_>>()?;
            let legacy = spec.legacy_halved_rates;
            generator(Box::new(move |t| {
                let mut ham = linalg::zeros(dim);
                for (c, m) in &h {
                    ham += m * C64::new(c.eval(t)?, 0.0);
                }
                let channels = ch
                    .iter()
                    .map(|(c, m)| Ok((c.eval(t)?, m.clone())))
                    .collect::<Result<_>>()?;
                let mut l = LindbladTerms::new(ham, channels).at_time(t);
                l.legacy_halved_rates = legacy;
                transfer_from_lindblad(&l)
            }))
        }
        ModelKind::GeneratorTerms => {
            let terms: Vec<(Rate, CMat, CMat)> = spec
                .terms
                .iter()
                .map(|x| {
                    Ok((
                        spec.resolve_rate(&x.coeff)?,
                        r.matrix(&x.a)?,
                        r.matrix(&x.b)?,
                    ))
                })
                .collect::<Result<_>>()?;
            generator(Box::new(move |t| {
                let terms = terms
                    .iter()
                    .map(|(c, a, b)| Ok((a * C64::new(c.eval(t)?, 0.0), b.clone())))
                    .collect::<Result<_>>()?;
                let s = transfer_from_terms(&GeneratorTerms { terms, time: t })?;
                if s.hermiticity_deviation() > 1e-12 * s.norm().max(1.0) {
                    return Err(Error::NotHermiticityPreserving {
                        deviation: s.hermiticity_deviation(),
                    });
                }
                let residual = s.trace_residual();
                if residual > 1e-11 * s.norm().max(1.0) {
                    return Err(Error::NotTraceAnnihilating { residual });
                }
                Ok(s)
            }))
        }
        ModelKind::PaperExample => {
            let gamma = Rate(r.param("gamma")?);
            let gamma_t = Rate(r.param("gamma_tilde")?);
            generator(Box::new(move |t| {
                let (g, gt) = (gamma.eval(t)?, gamma_t.eval(t)?);
                transfer_from_lindblad(&paper_example(g, gt).at_time(t))
            }))
        }
        ModelKind::Dephasing => {
            let gamma = Rate(r.param("gamma")?);
            generator(Box::new(move |t| {
                let l = linalg::sigma_z() * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                let terms = LindbladTerms::new(linalg::zeros(2), vec![(gamma.eval(t)?, l)]);
                transfer_from_lindblad(&terms.at_time(t))
            }))
        }
        ModelKind::JcAmplitudeDamping => {
            let lambda = r.scalar("lambda")?;
            let gamma0 = r.scalar("gamma0")?;
            let grid = map_grid(grid()?)?;
            Model::Maps(MapFamily::with_policy(
                grid.clone(),
                grid.points()
                    .iter()
                    .map(|&t| {
                        zoo::amplitude_damping_map(C64::new(
                            zoo::jc_amplitude(t, lambda, gamma0),
                            0.0,
                        ))
                    })
                    .collect(),
                policy,
            )?)
        }
        ModelKind::MemoryKernelDephasing => {
            let k = r.scalar("k")?;
            let lambda = r.scalar("lambda")?;
            let grid = map_grid(grid()?)?;
            let spec = MemoryKernelSpec {
                hamiltonian: linalg::zeros(2),
                kernel: Box::new(zoo::dephasing_kernel(k, lambda)),
            };
            Model::Maps(propagate_memory_kernel(&spec, &grid)?)
        }
        ModelKind::MapFamilyFile => {
            let path = spec
                .file
                .as_ref()
                .ok_or_else(|| Error::Config("map_family_file needs `file`".into()))?;
            let text = std::fs::read_to_string(base_dir.join(path))?;
            let file: MapFamilyFile = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let maps = file
                .maps
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let m = m.to_matrix(&format!("maps[{i}]"))?;
                    if m.nrows() != dim * dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim * dim,
                            found: m.nrows(),
                        });
                    }
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()?;
            if maps.len() != file.times.len() {
                return Err(Error::Config(format!(
                    "{} times but {} maps",
                    file.times.len(),
                    maps.len()
                )));
            }
            Model::Maps(MapFamily::with_policy(
                TimeGrid::new(file.times)?,
                maps,
                policy,
            )?)
        }
    })
}

fn map_grid(grid: TimeGrid) -> Result<TimeGrid> {
    if grid.start() != 0.0 {
        return Err(Error::InvalidGrid("map families start at t0 = 0".into()));
    }
    Ok(grid)
}

/// The two-level example with rates `2γ + γ̃` on `σx`, `σy` and `−γ` on
/// `σ±`, written in the halved-rate convention.
pub fn paper_example(gamma: f64, gamma_tilde: f64) -> LindbladTerms {
    let xy = 2.0 * gamma + gamma_tilde;
    LindbladTerms::new(
        linalg::zeros(2),
        vec![
            (xy, linalg::sigma_x()),
            (xy, linalg::sigma_y()),
            (-gamma, linalg::sigma_minus()),
            (-gamma, linalg::sigma_plus()),
        ],
    )
    .legacy()
}

/// Canonical rate shared by the two channels of [`paper_example`].
pub fn paper_example_rate(gamma: f64, gamma_tilde: f64) -> f64 {
    6.0 * gamma + 4.0 * gamma_tilde
}
