//! Problem files: declarative JSON descriptions of a local map.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use specdeg::galerkin::{GraphDomain, LocalMapSpec, Monomial, PolynomialGradient, Truncation};
use specdeg::hamiltonian::{hamiltonian_map, HamiltonianSpec, HamiltonianTerm};
use specdeg::srep::{shell_of, Rep, SpectralOperator};
use specdeg::GroupDescriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruncationSpec {
    Fixed(usize),
    Policy(Policy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Auto,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        TruncationSpec::Policy(Policy::Auto)
    }
}

impl TruncationSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(TruncationSpec::Policy(Policy::Auto));
        }
        s.parse()
            .map(TruncationSpec::Fixed)
            .map_err(|_| format!("truncation must be a level or \"auto\", got {s:?}"))
    }

    pub fn policy(self) -> Truncation {
        match self {
            TruncationSpec::Fixed(n) => Truncation::Fixed(n),
            TruncationSpec::Policy(Policy::Auto) => Truncation::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumEntry {
    /// Optional; checked against the eigenvalue when given.
    #[serde(default)]
    pub shell: Option<usize>,
    pub eigenvalue: f64,
    pub rep: Rep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemBody {
    Hamiltonian {
        dof: usize,
        terms: Vec<HamiltonianTerm>,
        lambda: f64,
    },
    Abstract {
        spectrum: Vec<SpectrumEntry>,
        /// φ in global eigen-coordinates; the map is Ax − ∇φ(x).
        #[serde(default)]
        potential: Vec<Monomial>,
        /// Ball centre (zero-padded, must lie in the fixed subspace).
        #[serde(default)]
        center: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(default = "circle")]
    pub group: GroupDescriptor,
    pub radius: f64,
    #[serde(default)]
    pub truncation: TruncationSpec,
    /// Boundary samples per real dimension.
    #[serde(default)]
    pub samples_per_dim: Option<usize>,
    #[serde(flatten)]
    pub body: ProblemBody,
}

fn circle() -> GroupDescriptor {
    GroupDescriptor::Circle
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed problem file: {e}"))
    }

    pub fn kind(&self) -> &'static str {
        match self.body {
            ProblemBody::Hamiltonian { .. } => "hamiltonian",
            ProblemBody::Abstract { .. } => "abstract",
        }
    }

    pub fn hamiltonian(&self) -> Option<HamiltonianSpec> {
        match &self.body {
            ProblemBody::Hamiltonian { dof, terms, lambda } => Some(HamiltonianSpec {
                dof: *dof,
                terms: terms.clone(),
                lambda: *lambda,
            }),
            ProblemBody::Abstract { .. } => None,
        }
    }

    /// Validates the file and builds the local map.
    pub fn build(&self) -> Result<LocalMapSpec<f64>, String> {
        if self.group != GroupDescriptor::Circle {
            return Err(format!("group {} is not supported: degree computation is implemented for S1 only", self.group));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(format!("radius must be positive and finite, got {}", self.radius));
        }
        if self.samples_per_dim == Some(0) {
            return Err("samples_per_dim must be positive".into());
        }
        match &self.body {
            ProblemBody::Hamiltonian { .. } => {
                let spec = self.hamiltonian().expect("hamiltonian body");
                hamiltonian_map(&spec, self.radius).map_err(|e| e.to_string())
            }
            ProblemBody::Abstract { spectrum, potential, center } => {
                let op = abstract_operator(spectrum)?;
                let dim: usize = spectrum.iter().map(|e| e.rep.dim()).sum();
                for m in potential {
                    if !m.coeff.is_finite() {
                        return Err("potential coefficients must be finite".into());
                    }
                    if let Some(&(i, _)) = m.vars.iter().find(|&&(i, _)| i >= dim) {
                        return Err(format!("potential refers to coordinate {i}, but the spectrum has dimension {dim}"));
                    }
                }
                if center.len() > dim || center.iter().any(|c| !c.is_finite()) {
                    return Err(format!("center must have at most {dim} finite entries"));
                }
                Ok(LocalMapSpec::new(
                    op,
                    Arc::new(PolynomialGradient::new(potential.clone())),
                    GraphDomain::ball(center.clone(), self.radius),
                ))
            }
        }
    }
}

fn abstract_operator(spectrum: &[SpectrumEntry]) -> Result<SpectralOperator<f64>, String> {
    if spectrum.is_empty() {
        return Err("spectrum is empty".into());
    }
    for e in spectrum {
        if !e.eigenvalue.is_finite() {
            return Err(format!("eigenvalue {} is not finite", e.eigenvalue));
        }
        if let Some(s) = e.shell {
            let actual = shell_of(e.eigenvalue);
            if s != actual {
                return Err(format!(
                    "eigenvalue {} is listed in shell {s} but belongs to shell {actual}",
                    e.eigenvalue
                ));
            }
        }
        if e.rep.is_zero() {
            return Err(format!("eigenvalue {} has a zero eigenspace", e.eigenvalue));
        }
    }
    let mut values: Vec<f64> = spectrum.iter().map(|e| e.eigenvalue).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    if values.windows(2).any(|w| w[0] == w[1]) {
        return Err("eigenvalues must be listed once each (merge their representations)".into());
    }
    SpectralOperator::from_eigenvalues(
        "abstract",
        spectrum.iter().map(|e| (e.eigenvalue, e.rep.clone())).collect(),
    )
    .map_err(|e| e.to_string())
}
