use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use npc_lab::riemannian::build_mesh;
use npc_lab::{DomainTag, MeshDomain, SolverConfig, TargetSpace};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, ConfigIssue};

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub domain: DomainSpec,
    pub target: TargetSpace,
    pub map: MapSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    pub analysis: AnalysisSpec,
    /// Default output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub tag: DomainTag,
    pub resolution: usize,
}

impl DomainSpec {
    /// Radius of the largest ball that fits in the domain.
    pub fn inradius(&self) -> f64 {
        match self.tag {
            DomainTag::FlatTorus { l1, l2 } => 0.5 * l1.min(l2),
            DomainTag::FlatSquare => 0.5,
            DomainTag::RoundSphere { radius } => std::f64::consts::PI * radius,
            DomainTag::HyperbolicPatch { radius } => radius,
        }
    }

    pub fn has_boundary(&self) -> bool {
        matches!(self.tag, DomainTag::FlatSquare | DomainTag::HyperbolicPatch { .. })
    }
}

/// How the map is obtained: by solving a Dirichlet problem with the given
/// boundary values, or by evaluating the data everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    Dirichlet,
    Prescribed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub mode: MapMode,
    pub data: MapData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapData {
    /// `offset + matrix·(x, y)` into a Euclidean target, in chart
    /// coordinates.
    Affine { offset: Vec<f64>, matrix: Vec<Vec<f64>> },
    /// Boundary of the unit square split into one arc per ray of a star
    /// tree; each arc goes out along its ray to `amplitude` and back.
    TreeArcs { amplitude: f64 },
    /// The inclusion of a hyperbolic patch into the hyperbolic plane.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasepointSpec {
    /// Vertices nearest to the given chart points.
    Points { points: Vec<Vec<f64>> },
    /// Seeded sample of vertices whose balls fit at the largest radius.
    Random { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Order,
    EnergyBound,
    FluxEnergy,
    MeanValue,
    CauchySchwarz,
    DomainVariation,
    TargetVariation,
    Bochner,
    Conformal,
    TotallyGeodesic,
    Lipschitz,
    Comparison,
}

impl CheckKind {
    pub const ALL: [CheckKind; 12] = [
        CheckKind::Order,
        CheckKind::EnergyBound,
        CheckKind::FluxEnergy,
        CheckKind::MeanValue,
        CheckKind::CauchySchwarz,
        CheckKind::DomainVariation,
        CheckKind::TargetVariation,
        CheckKind::Bochner,
        CheckKind::Conformal,
        CheckKind::TotallyGeodesic,
        CheckKind::Lipschitz,
        CheckKind::Comparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Order => "order",
            CheckKind::EnergyBound => "energy_bound",
            CheckKind::FluxEnergy => "flux_energy",
            CheckKind::MeanValue => "mean_value",
            CheckKind::CauchySchwarz => "cauchy_schwarz",
            CheckKind::DomainVariation => "domain_variation",
            CheckKind::TargetVariation => "target_variation",
            CheckKind::Bochner => "bochner",
            CheckKind::Conformal => "conformal",
            CheckKind::TotallyGeodesic => "totally_geodesic",
            CheckKind::Lipschitz => "lipschitz",
            CheckKind::Comparison => "comparison",
        }
    }

    /// Checks evaluated at every basepoint and radius of the ladder.
    pub fn is_radial(self) -> bool {
        matches!(
            self,
            CheckKind::Order
                | CheckKind::EnergyBound
                | CheckKind::FluxEnergy
                | CheckKind::MeanValue
                | CheckKind::CauchySchwarz
                | CheckKind::DomainVariation
        )
    }

    /// Whether the check makes sense for this domain and target. Explicitly
    /// requested checks that do not apply are skipped at run time.
    pub fn applies_to(self, domain: &DomainTag, target: &TargetSpace) -> bool {
        match self {
            CheckKind::Conformal => {
                matches!(domain, DomainTag::HyperbolicPatch { .. }) && matches!(target, TargetSpace::HyperbolicPlane)
            }
            CheckKind::TotallyGeodesic => domain.is_flat(),
            _ => true,
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CheckKind::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| format!("unknown check {s:?}"))
    }
}

/// Parses a comma-separated check list such as `order,bochner`.
pub fn parse_check_list(s: &str) -> Result<Vec<CheckKind>, String> {
    let mut out: Vec<CheckKind> = s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub count: usize,
    pub radius: f64,
    /// Allowed deficit per unit of `∫η`.
    #[serde(default = "default_bump_tolerance")]
    pub tolerance: f64,
}

fn default_bump_tolerance() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub count: usize,
    /// Bound on the relative midpoint defect.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Radii for the radial checks, increasing.
    pub sigmas: Vec<f64>,
    pub basepoints: BasepointSpec,
    /// Absolute tolerance for pointwise residuals.
    pub tolerance: f64,
    /// Relative tolerance for the ratio checks.
    #[serde(default = "default_rel_tolerance")]
    pub rel_tolerance: f64,
    /// Radius of the ball average in the Bochner residual; defaults to the
    /// smallest ladder radius.
    #[serde(default)]
    pub bochner_sigma: Option<f64>,
    /// Required fraction of eligible vertices with a passing residual.
    #[serde(default = "default_bochner_fraction")]
    pub bochner_fraction: f64,
    #[serde(default)]
    pub bumps: Option<BumpSpec>,
    #[serde(default)]
    pub geodesics: Option<GeodesicSpec>,
    #[serde(default)]
    pub lipschitz_depth: Option<f64>,
    #[serde(default = "default_anisotropy")]
    pub anisotropy_tol: f64,
    /// Random triangles for the comparison fuzzing.
    #[serde(default)]
    pub triangles: usize,
    /// Restricts the run to these checks; all applicable checks otherwise.
    #[serde(default)]
    pub checks: Option<Vec<CheckKind>>,
}

fn default_rel_tolerance() -> f64 {
    1e-2
}
fn default_bochner_fraction() -> f64 {
    0.95
}
fn default_anisotropy() -> f64 {
    0.05
}

impl AnalysisSpec {
    pub fn bochner_sigma(&self) -> f64 {
        self.bochner_sigma.unwrap_or_else(|| self.sigmas.first().copied().unwrap_or(0.0))
    }
}

impl Scenario {
    /// Enabled checks in canonical order, restricted to the ones that apply.
    pub fn enabled_checks(&self) -> Vec<CheckKind> {
        match &self.analysis.checks {
            Some(list) => {
                let mut l = list.clone();
                l.sort();
                l.dedup();
                l
            }
            None => CheckKind::ALL
                .into_iter()
                .filter(|c| c.applies_to(&self.domain.tag, &self.target))
                .filter(|c| match c {
                    CheckKind::TargetVariation => self.analysis.bumps.is_some(),
                    CheckKind::TotallyGeodesic => self.analysis.geodesics.is_some(),
                    CheckKind::Lipschitz => self.analysis.lipschitz_depth.is_some(),
                    CheckKind::Comparison => self.analysis.triangles > 0,
                    _ => true,
                })
                .collect(),
        }
    }

    pub fn build_mesh(&self) -> npc_lab::Result<MeshDomain> {
        build_mesh(&self.domain.tag, self.domain.resolution)
    }

    /// Every violated constraint, with its field path.
    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut push = |path: &str, message: String| issues.push(ConfigIssue::new(path, message));
        if self.name.trim().is_empty() {
            push("name", "must not be empty".into());
        }
        if let Err(e) = self.target.validate() {
            push("target", e.to_string());
        }
        if let Err(e) = self.solver.validate() {
            push("solver", e.to_string());
        }
        let h = match self.build_mesh() {
            Ok(m) => Some(m.mesh_size()),
            Err(e) => {
                push("domain", e.to_string());
                None
            }
        };
        validate_map(self, &mut push);

        let a = &self.analysis;
        let inradius = self.domain.inradius();
        let radius_ok = |path: &str, s: f64| -> Option<ConfigIssue> {
            let h = h?;
            if !(s >= 3.0 * h * (1.0 - 1e-12)) {
                Some(ConfigIssue::new(path, format!("{s} is below 3h = {}", 3.0 * h)))
            } else if !(s < inradius) {
                Some(ConfigIssue::new(path, format!("{s} is not below the domain clearance {inradius}")))
            } else {
                None
            }
        };
        let mut radius_issues = Vec::new();
        for (k, &s) in a.sigmas.iter().enumerate() {
            radius_issues.extend(radius_ok(&format!("analysis.sigmas[{k}]"), s));
        }
        if a.bochner_sigma.is_some() {
            radius_issues.extend(radius_ok("analysis.bochner_sigma", a.bochner_sigma()));
        }
        if let Some(b) = &a.bumps {
            radius_issues.extend(radius_ok("analysis.bumps.radius", b.radius));
        }
        for i in radius_issues {
            push(&i.path, i.message);
        }
        if a.sigmas.is_empty() {
            push("analysis.sigmas", "must not be empty".into());
        }
        if a.sigmas.windows(2).any(|w| !(w[1] > w[0])) {
            push("analysis.sigmas", "must be strictly increasing".into());
        }
        if let Some(b) = &a.bumps {
            positive(&mut push, "analysis.bumps.tolerance", b.tolerance);
        }
        if let Some(d) = a.lipschitz_depth {
            if !(d > 0.0 && d < inradius) {
                push("analysis.lipschitz_depth", format!("{d} outside (0, {inradius})"));
            }
        }
        if let Some(g) = &a.geodesics {
            positive(&mut push, "analysis.geodesics.tolerance", g.tolerance);
        }
        positive(&mut push, "analysis.tolerance", a.tolerance);
        positive(&mut push, "analysis.rel_tolerance", a.rel_tolerance);
        positive(&mut push, "analysis.anisotropy_tol", a.anisotropy_tol);
        if !(a.bochner_fraction > 0.0 && a.bochner_fraction <= 1.0) {
            push("analysis.bochner_fraction", format!("{} outside (0, 1]", a.bochner_fraction));
        }
        match &a.basepoints {
            BasepointSpec::Random { count: 0 } => push("analysis.basepoints.count", "must be positive".into()),
            BasepointSpec::Points { points } => {
                if points.is_empty() {
                    push("analysis.basepoints.points", "must not be empty".into());
                }
                for (k, p) in points.iter().enumerate() {
                    if !(2..=3).contains(&p.len()) || p.iter().any(|x| !x.is_finite()) {
                        push(&format!("analysis.basepoints.points[{k}]"), "needs 2 or 3 finite coordinates".into());
                    }
                }
            }
            _ => {}
        }
        issues
    }
}

fn positive(push: &mut impl FnMut(&str, String), path: &str, x: f64) {
    if !(x > 0.0) {
        push(path, format!("must be positive, got {x}"));
    }
}

fn validate_map(s: &Scenario, push: &mut impl FnMut(&str, String)) {
    if s.map.mode == MapMode::Dirichlet && !s.domain.has_boundary() {
        push("map.mode", "Dirichlet data needs a domain with boundary".into());
    }
    match &s.map.data {
        MapData::Affine { offset, matrix } => {
            let TargetSpace::Euclidean { dim } = s.target else {
                push("map.data.kind", format!("affine data needs a euclidean target, not {}", s.target.label()));
                return;
            };
            if offset.len() != dim {
                push("map.data.offset", format!("expected {dim} entries, found {}", offset.len()));
            }
            if matrix.len() != dim || matrix.iter().any(|r| r.len() != 2) {
                push("map.data.matrix", format!("expected {dim} rows of 2 entries"));
            }
            if !s.domain.tag.is_flat() {
                push("map.data.kind", "affine data needs a flat domain".into());
            }
        }
        MapData::TreeArcs { amplitude } => {
            if s.map.mode != MapMode::Dirichlet {
                push("map.mode", "tree arcs only define boundary values".into());
            }
            if s.domain.tag != DomainTag::FlatSquare {
                push("map.data.kind", "tree arcs need the square domain".into());
            }
            match &s.target {
                TargetSpace::Tree(t) => {
                    if t.edges().iter().any(|e| e.a != 0) {
                        push("target.edges", "tree arcs need a star centred at vertex 0".into());
                    }
                    let shortest = t.edges().iter().map(|e| e.length).fold(f64::INFINITY, f64::min);
                    if !(*amplitude > 0.0 && *amplitude <= shortest) {
                        push("map.data.amplitude", format!("{amplitude} outside (0, {shortest}]"));
                    }
                }
                other => push("map.data.kind", format!("tree arcs need a tree target, not {}", other.label())),
            }
        }
        MapData::Identity => {
            if !matches!(s.domain.tag, DomainTag::HyperbolicPatch { .. }) || s.target != TargetSpace::HyperbolicPlane {
                push("map.data.kind", "identity needs a hyperbolic patch and the hyperbolic plane".into());
            }
        }
    }
}

/// Parses TOML, or JSON when the text starts with `{`, then validates.
pub fn parse_scenario_str(text: &str) -> Result<Scenario, CliError> {
    let parsed: Result<Scenario, ConfigIssue> = if text.trim_start().starts_with('{') {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| issue_from_path(e.path().to_string(), e.inner().to_string()))
    } else {
        match toml::Deserializer::parse(text) {
            Ok(de) => serde_path_to_error::deserialize(de)
                .map_err(|e| issue_from_path(e.path().to_string(), e.inner().message().to_string())),
            Err(e) => Err(ConfigIssue::new("", e.message().to_string())),
        }
    };
    let scenario = parsed.map_err(|i| CliError::Config(vec![i]))?;
    let issues = scenario.validate();
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(CliError::Config(issues))
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_str(&text)
}

/// Moves the name of a missing field into the path, so that a missing
/// `kind` under `target` is reported at `target.kind`.
fn issue_from_path(path: String, message: String) -> ConfigIssue {
    let path = if path == "." { String::new() } else { path };
    if let Some(field) = message
        .strip_prefix("missing field `")
        .and_then(|r| r.split('`').next())
    {
        let full = if path.is_empty() { field.to_string() } else { format!("{path}.{field}") };
        return ConfigIssue::new(&full, "missing field".into());
    }
    ConfigIssue::new(&path, message)
}
