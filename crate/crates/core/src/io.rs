//! JSON layouts for polyhedra, instances, market models and certificates.
//! Every number is an exact rational written as a `"p/q"` string.

use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{ClosedPolyhedron, FaceId, Halfspace, Hyperplane, SemiOpenPolyhedron};
use crate::linalg::{neg, Vector};
use crate::markets::cost::{verify_cost_certificate, verify_cost_price_system, CostCertificate, CostModel, MaxAffine};
use crate::markets::frictionless::{verify_frictionless_certificate, verify_frictionless_price_system, FrictionlessCertificate, FrictionlessModel};
use crate::markets::kabanov::{verify_kabanov_certificate, verify_kabanov_price_system, KabanovCertificate, KabanovModel};
use crate::markets::FtapOutcome;
use crate::msp::{compute_w, verify_solution, MspInstance, Solution};
use crate::scalar::Scalar;
use crate::scenario::{NodeId, NodeMap, ScenarioTree};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

/// `normal . x (relation) offset`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDoc {
    pub normal: Vector,
    #[serde(default = "Scalar::zero")]
    pub offset: Scalar,
    #[serde(default = "ge")]
    pub relation: Relation,
}

fn ge() -> Relation {
    Relation::Ge
}

/// A polyhedron given by constraints, by generators, or both (in which
/// case the constraints are authoritative). `{"dim": d}` alone is all of
/// `R^d`; rays or lineality without points generate a cone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyhedronDoc {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inequalities: Option<Vec<ConstraintDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vector>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<Vec<Vector>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineality: Option<Vec<Vector>>,
}

impl PolyhedronDoc {
    fn check_len(&self, v: &[Scalar], what: &str) -> Result<(), String> {
        if v.len() != self.dim {
            return Err(format!("{what} has length {}, expected {}", v.len(), self.dim));
        }
        Ok(())
    }

    /// The listed constraints as `>=` halfspaces and hyperplanes, in order;
    /// equalities are kept in place so that face indices count them too.
    fn constraints(&self) -> Result<(Vec<Halfspace>, Vec<Hyperplane>, Vec<Option<usize>>), String> {
        let mut ineqs = Vec::new();
        let mut eqs = Vec::new();
        let mut index = Vec::new();
        for c in self.inequalities.iter().flatten() {
            self.check_len(&c.normal, "constraint normal")?;
            match c.relation {
                Relation::Ge => {
                    index.push(Some(ineqs.len()));
                    ineqs.push(Halfspace { normal: c.normal.clone(), offset: c.offset.clone() });
                }
                Relation::Le => {
                    index.push(Some(ineqs.len()));
                    ineqs.push(Halfspace { normal: neg(&c.normal), offset: -&c.offset });
                }
                Relation::Eq => {
                    index.push(None);
                    eqs.push(Hyperplane { normal: c.normal.clone(), offset: c.offset.clone() });
                }
            }
        }
        Ok((ineqs, eqs, index))
    }

    pub fn build(&self) -> Result<ClosedPolyhedron, String> {
        if self.inequalities.is_some() || (self.points.is_none() && self.rays.is_none() && self.lineality.is_none()) {
            let (ineqs, eqs, _) = self.constraints()?;
            return Ok(ClosedPolyhedron::from_h(self.dim, ineqs, eqs));
        }
        let mut points = self.points.clone().unwrap_or_default();
        let rays = self.rays.clone().unwrap_or_default();
        let lineality = self.lineality.clone().unwrap_or_default();
        for v in points.iter().chain(&rays).chain(&lineality) {
            self.check_len(v, "generator")?;
        }
        if self.points.is_none() {
            points.push(vec![Scalar::zero(); self.dim]);
        }
        Ok(ClosedPolyhedron::from_v(self.dim, points, rays, lineality))
    }

    /// Both representations of a canonical polyhedron.
    pub fn of(p: &ClosedPolyhedron) -> Self {
        let mut cons: Vec<ConstraintDoc> = p
            .inequalities()
            .iter()
            .map(|h| ConstraintDoc { normal: h.normal.clone(), offset: h.offset.clone(), relation: Relation::Ge })
            .collect();
        cons.extend(p.equalities().iter().map(|h| ConstraintDoc { normal: h.normal.clone(), offset: h.offset.clone(), relation: Relation::Eq }));
        PolyhedronDoc {
            dim: p.dim(),
            inequalities: Some(cons),
            points: Some(p.points().to_vec()),
            rays: Some(p.rays().to_vec()),
            lineality: Some(p.lineality().to_vec()),
        }
    }
}

impl Serialize for ClosedPolyhedron {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolyhedronDoc::of(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClosedPolyhedron {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        PolyhedronDoc::deserialize(d)?.build().map_err(D::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Openness {
    #[default]
    Closed,
    Relint,
    /// Only the faces listed as included (plus the top face).
    Faces,
}

/// A face named by the constraints tight on it, as indices into the
/// listed constraints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceFlagDoc {
    pub tight: Vec<usize>,
    pub included: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiOpenDoc {
    pub polyhedron: PolyhedronDoc,
    #[serde(default)]
    pub openness: Openness,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faces: Vec<FaceFlagDoc>,
}

impl SemiOpenDoc {
    pub fn build(&self) -> Result<SemiOpenPolyhedron, String> {
        let p = self.polyhedron.build()?;
        if p.is_empty() {
            return Ok(SemiOpenPolyhedron::empty(p.dim()));
        }
        let faces = p.faces();
        let mut flags: Vec<(FaceId, bool)> = faces
            .iter()
            .map(|f| {
                let inc = match self.openness {
                    Openness::Closed => true,
                    Openness::Relint | Openness::Faces => f.id.is_top(),
                };
                (f.id.clone(), inc)
            })
            .collect();
        let (ineqs, eqs, index) = self.polyhedron.constraints()?;
        let uses_listed = self.polyhedron.inequalities.is_some();
        for flag in &self.faces {
            let mut face_eqs = eqs.clone();
            for &i in &flag.tight {
                let h = if uses_listed {
                    match index.get(i) {
                        Some(Some(j)) => &ineqs[*j],
                        Some(None) => continue,
                        None => return Err(format!("face index {i} is out of range")),
                    }
                } else {
                    p.inequalities().get(i).ok_or(format!("face index {i} is out of range"))?
                };
                face_eqs.push(Hyperplane { normal: h.normal.clone(), offset: h.offset.clone() });
            }
            let all_ineqs = if uses_listed { ineqs.clone() } else { p.inequalities().to_vec() };
            let mut all_eqs = face_eqs;
            if !uses_listed {
                all_eqs.extend(p.equalities().iter().cloned());
            }
            let face = ClosedPolyhedron::from_h(p.dim(), all_ineqs, all_eqs);
            let x = face.sample_ri_point().map_err(|_| format!("face {:?} is empty", flag.tight))?;
            let id = p.minimal_face(&x).map_err(|e| e.to_string())?;
            if id.is_top() && !flag.included {
                return Err("the whole polyhedron cannot be excluded".into());
            }
            for (fid, inc) in &mut flags {
                if *fid == id {
                    *inc = flag.included;
                }
            }
        }
        let included: Vec<FaceId> = flags.into_iter().filter(|(_, inc)| *inc).map(|(id, _)| id).collect();
        SemiOpenPolyhedron::from_included(p, &included).map_err(|e| e.to_string())
    }

    pub fn of(s: &SemiOpenPolyhedron) -> Self {
        let polyhedron = PolyhedronDoc::of(s.closure());
        if s.is_empty() || s.is_closed() {
            return SemiOpenDoc { polyhedron, openness: Openness::Closed, faces: vec![] };
        }
        if s.is_relatively_open() {
            return SemiOpenDoc { polyhedron, openness: Openness::Relint, faces: vec![] };
        }
        let faces = s
            .faces()
            .iter()
            .filter(|f| !f.id.is_top())
            .map(|f| FaceFlagDoc { tight: f.id.indices(), included: s.is_included(&f.id) })
            .collect();
        SemiOpenDoc { polyhedron, openness: Openness::Faces, faces }
    }
}

impl Serialize for SemiOpenPolyhedron {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SemiOpenDoc::of(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SemiOpenPolyhedron {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        SemiOpenDoc::deserialize(d)?.build().map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct MspDoc {
    tree: ScenarioTree,
    v: NodeMap<SemiOpenPolyhedron>,
    c: NodeMap<ClosedPolyhedron>,
}

impl Serialize for MspInstance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MspDoc { tree: self.tree().clone(), v: self.v_map().clone(), c: self.c_map().clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MspInstance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = MspDoc::deserialize(d)?;
        MspInstance::new(doc.tree, doc.v, doc.c).map_err(D::Error::custom)
    }
}

fn universe_map(tree: &ScenarioTree, d: usize) -> NodeMap<ClosedPolyhedron> {
    NodeMap::from_fn(tree, |_| ClosedPolyhedron::universe(d))
}

#[derive(Serialize, Deserialize)]
struct FrictionlessDoc {
    tree: ScenarioTree,
    prices: NodeMap<Vector>,
    #[serde(default)]
    constraints: Option<NodeMap<ClosedPolyhedron>>,
}

impl Serialize for FrictionlessModel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FrictionlessDoc { tree: self.tree.clone(), prices: self.prices.clone(), constraints: Some(self.constraints.clone()) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FrictionlessModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = FrictionlessDoc::deserialize(d)?;
        if !doc.prices.fits(&doc.tree) {
            return Err(D::Error::custom("prices do not match the tree"));
        }
        let a = doc.constraints.unwrap_or_else(|| universe_map(&doc.tree, doc.prices.levels()[0][0].len()));
        FrictionlessModel::new(doc.tree, doc.prices, a).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct KabanovDoc {
    tree: ScenarioTree,
    solvency: NodeMap<ClosedPolyhedron>,
    #[serde(default)]
    constraints: Option<NodeMap<ClosedPolyhedron>>,
}

impl Serialize for KabanovModel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        KabanovDoc { tree: self.tree.clone(), solvency: self.solvency.clone(), constraints: Some(self.constraints.clone()) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for KabanovModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = KabanovDoc::deserialize(d)?;
        if !doc.solvency.fits(&doc.tree) {
            return Err(D::Error::custom("solvency cones do not match the tree"));
        }
        let a = doc.constraints.unwrap_or_else(|| universe_map(&doc.tree, doc.solvency.levels()[0][0].dim()));
        KabanovModel::new(doc.tree, doc.solvency, a).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct CostDoc {
    tree: ScenarioTree,
    costs: NodeMap<MaxAffine>,
    #[serde(default)]
    constraints: Option<NodeMap<ClosedPolyhedron>>,
}

impl Serialize for CostModel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CostDoc { tree: self.tree.clone(), costs: self.costs.clone(), constraints: Some(self.constraints.clone()) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CostModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = CostDoc::deserialize(d)?;
        if !doc.costs.fits(&doc.tree) {
            return Err(D::Error::custom("costs do not match the tree"));
        }
        let a = doc.constraints.unwrap_or_else(|| universe_map(&doc.tree, doc.costs.levels()[0][0].dim()));
        CostModel::new(doc.tree, doc.costs, a).map_err(D::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Msp,
    Frictionless,
    Kabanov,
    Cost,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Msp => "msp",
            ModelKind::Frictionless => "frictionless",
            ModelKind::Kabanov => "kabanov",
            ModelKind::Cost => "cost",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Msp(MspInstance),
    Frictionless(FrictionlessModel),
    Kabanov(KabanovModel),
    Cost(CostModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Msp(_) => ModelKind::Msp,
            Model::Frictionless(_) => ModelKind::Frictionless,
            Model::Kabanov(_) => ModelKind::Kabanov,
            Model::Cost(_) => ModelKind::Cost,
        }
    }

    pub fn tree(&self) -> &ScenarioTree {
        match self {
            Model::Msp(m) => m.tree(),
            Model::Frictionless(m) => &m.tree,
            Model::Kabanov(m) => &m.tree,
            Model::Cost(m) => &m.tree,
        }
    }
}

/// A self-contained, replayable record of an instance and its verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Certificate {
    Msp {
        instance: MspInstance,
        /// Deepest failing node of `W`, if any.
        failure: Option<NodeId>,
        solutions: Vec<Solution>,
    },
    Frictionless { market: FrictionlessModel, outcome: FtapOutcome<FrictionlessCertificate> },
    Kabanov { market: KabanovModel, outcome: FtapOutcome<KabanovCertificate> },
    Cost { market: CostModel, outcome: FtapOutcome<CostCertificate> },
}

impl Certificate {
    /// Whether the recorded verdict is "solvable" / "no arbitrage".
    pub fn favorable(&self) -> bool {
        match self {
            Certificate::Msp { failure, .. } => failure.is_none(),
            Certificate::Frictionless { outcome, .. } => !outcome.is_arbitrage(),
            Certificate::Kabanov { outcome, .. } => !outcome.is_arbitrage(),
            Certificate::Cost { outcome, .. } => !outcome.is_arbitrage(),
        }
    }

    /// Re-checks every recorded object against the embedded model.
    pub fn check(&self) -> Result<(), String> {
        match self {
            Certificate::Msp { instance, failure, solutions } => {
                let found = compute_w(instance).map_err(|e| e.to_string())?.failure().map(|(_, n)| n);
                if found != *failure {
                    return Err(format!("recorded failure {failure:?} differs from the recomputed {found:?}"));
                }
                if failure.is_some() && !solutions.is_empty() {
                    return Err("an unsolvable instance cannot carry solutions".into());
                }
                for s in solutions {
                    if let Some(v) = verify_solution(instance, s).first() {
                        return Err(format!("solution anchored at {}: {v}", s.anchor));
                    }
                }
                Ok(())
            }
            Certificate::Frictionless { market, outcome } => match outcome {
                FtapOutcome::NoArbitrage(na) => {
                    na.price_systems.iter().try_for_each(|p| verify_frictionless_price_system(market, p).map_err(|e| format!("price system at {}: {e}", p.anchor)))
                }
                FtapOutcome::Arbitrage(c) => verify_frictionless_certificate(market, c),
            },
            Certificate::Kabanov { market, outcome } => match outcome {
                FtapOutcome::NoArbitrage(na) => {
                    let (_, friction) = market.check_assumptions().map_err(|e| e.to_string())?;
                    if na.robust != friction.is_none() {
                        return Err("recorded robustness flag does not match the model".into());
                    }
                    na.price_systems.iter().try_for_each(|p| verify_kabanov_price_system(market, p).map_err(|e| format!("price system at {}: {e}", p.anchor)))
                }
                FtapOutcome::Arbitrage(c) => verify_kabanov_certificate(market, c),
            },
            Certificate::Cost { market, outcome } => match outcome {
                FtapOutcome::NoArbitrage(na) => {
                    let (_, friction) = market.check_assumptions().map_err(|e| e.to_string())?;
                    if na.robust != friction.is_none() {
                        return Err("recorded robustness flag does not match the model".into());
                    }
                    na.price_systems.iter().try_for_each(|p| verify_cost_price_system(market, p).map_err(|e| format!("price system at {}: {e}", p.anchor)))
                }
                FtapOutcome::Arbitrage(c) => verify_cost_certificate(market, c),
            },
        }
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Parse { path: path.display().to_string(), source })
}

/// Loads a model. A `"tree"` given as a string is read as a tree file
/// relative to the model file; `kind` fills in a missing `"model"` tag and
/// must agree with a present one.
pub fn load_model(path: &Path, kind: Option<ModelKind>) -> Result<Model, IoError> {
    let mut value = read_json(path)?;
    let obj = value.as_object_mut().ok_or_else(|| IoError::Invalid(format!("{}: expected a JSON object", path.display())))?;
    if let Some(serde_json::Value::String(tree_path)) = obj.get("tree") {
        let full = path.parent().unwrap_or(Path::new(".")).join(tree_path);
        obj.insert("tree".into(), read_json(&full)?);
    }
    match (obj.get("model").and_then(|m| m.as_str()), kind) {
        (None, Some(k)) => {
            obj.insert("model".into(), serde_json::Value::String(k.to_string()));
        }
        (Some(found), Some(k)) if found != k.to_string() => {
            return Err(IoError::Invalid(format!("{}: file holds a {found} model, expected {k}", path.display())));
        }
        (None, None) => return Err(IoError::Invalid(format!("{}: no \"model\" field and no --model given", path.display()))),
        _ => {}
    }
    serde_json::from_value(value).map_err(|source| IoError::Parse { path: path.display().to_string(), source })
}

pub fn load_certificate(path: &Path) -> Result<Certificate, IoError> {
    serde_json::from_value(read_json(path)?).map_err(|source| IoError::Parse { path: path.display().to_string(), source })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    std::fs::write(path, to_json(value)).map_err(|source| IoError::Write { path: path.display().to_string(), source })
}
