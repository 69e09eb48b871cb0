//! JSON file formats for spaces, covers, maps and system specs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lebdyn_core::metric::validate_space;
use lebdyn_core::systems::ParamValue;
use lebdyn_core::{Cover, DynMap, Family, FiniteMetricSpace, Label, Metric, PointSet, SystemSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// `{"points": [labels], "metric": {...}, "scale": c}`. `points` and `scale`
/// are optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<LabelFile>>,
    pub metric: MetricFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

/// `null`, a string, or an array of coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum LabelFile {
    None(()),
    Text(String),
    Coords(Vec<f64>),
}

// Goes through `Value`: untagged enums buffer numbers in a form that
// `arbitrary_precision` cannot read back as `f64`.
impl<'de> Deserialize<'de> for LabelFile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match Value::deserialize(d)? {
            Value::Null => Ok(LabelFile::None(())),
            Value::String(s) => Ok(LabelFile::Text(s)),
            Value::Array(items) => items
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| D::Error::custom("label coordinates must be numbers")))
                .collect::<Result<_, _>>()
                .map(LabelFile::Coords),
            _ => Err(D::Error::custom("a label is null, a string or an array of numbers")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricFile {
    /// Full rows, or a lower triangle with or without the diagonal.
    Matrix {
        distances: Vec<Vec<f64>>,
    },
    Euclidean {
        coords: Vec<Vec<f64>>,
    },
    /// Coordinates in `[0, 1)` on the circle of circumference one.
    Circle {
        coords: Vec<f64>,
    },
    CircleGrid {
        size: usize,
    },
    MaxProduct {
        left: Box<SpaceFile>,
        right: Box<SpaceFile>,
    },
}

// Dispatches on `kind` by hand for the same reason as `LabelFile`.
impl<'de> Deserialize<'de> for MetricFile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct MatrixF {
            distances: Vec<Vec<f64>>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct EuclideanF {
            coords: Vec<Vec<f64>>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct CircleF {
            coords: Vec<f64>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct GridF {
            size: usize,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct ProductF {
            left: Box<SpaceFile>,
            right: Box<SpaceFile>,
        }

        let mut value = Value::deserialize(d)?;
        let obj = value.as_object_mut().ok_or_else(|| D::Error::custom("metric must be an object"))?;
        let kind = match obj.remove("kind") {
            Some(Value::String(k)) => k,
            _ => return Err(D::Error::custom("metric needs a string field `kind`")),
        };
        let err = D::Error::custom;
        Ok(match kind.as_str() {
            "matrix" => MetricFile::Matrix { distances: MatrixF::deserialize(value).map_err(err)?.distances },
            "euclidean" => MetricFile::Euclidean { coords: EuclideanF::deserialize(value).map_err(err)?.coords },
            "circle" => MetricFile::Circle { coords: CircleF::deserialize(value).map_err(err)?.coords },
            "circle_grid" => MetricFile::CircleGrid { size: GridF::deserialize(value).map_err(err)?.size },
            "max_product" => {
                let p = ProductF::deserialize(value).map_err(err)?;
                MetricFile::MaxProduct { left: p.left, right: p.right }
            }
            other => return Err(D::Error::custom(format!("unknown metric kind `{other}`"))),
        })
    }
}

/// `{"members": [[point ids]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverFile {
    pub members: Vec<Vec<usize>>,
}

/// `{"image": [f(0), f(1), ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub image: Vec<usize>,
}

/// `{"family", "params", "mesh_radii", "horizon"}`, plus optional overrides
/// of the bundle's known values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub mesh_radii: Vec<f64>,
    #[serde(default)]
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub known: BTreeMap<String, f64>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory JSON serialization");
    s.push('\n');
    s
}

impl LabelFile {
    fn to_label(&self) -> Label {
        match self {
            LabelFile::None(()) => Label::None,
            LabelFile::Text(s) => Label::Text(s.clone()),
            LabelFile::Coords(c) => Label::Coords(c.clone()),
        }
    }

    fn from_label(label: &Label) -> Self {
        match label {
            Label::None => LabelFile::None(()),
            Label::Text(s) => LabelFile::Text(s.clone()),
            Label::Coords(c) => LabelFile::Coords(c.clone()),
        }
    }
}

fn matrix_data(rows: &[Vec<f64>]) -> Result<(usize, Vec<f64>), CliError> {
    let n = rows.len();
    if rows.iter().all(|r| r.len() == n) {
        return Ok((n, rows.concat()));
    }
    // Lower triangle: row i holds d(i, 0..i), optionally followed by d(i, i).
    let strict = rows.iter().enumerate().all(|(i, r)| r.len() == i);
    let with_diag = rows.iter().enumerate().all(|(i, r)| r.len() == i + 1);
    if !strict && !with_diag {
        return Err(usage("distance matrix must be square or lower-triangular"));
    }
    let mut data = vec![0.0; n * n];
    for (i, r) in rows.iter().enumerate() {
        for (j, &d) in r.iter().enumerate().take(i) {
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
        if with_diag && r[i] != 0.0 {
            return Err(usage(format!("distance matrix has a non-zero diagonal at row {i}")));
        }
    }
    Ok((n, data))
}

impl SpaceFile {
    /// Builds the space and rejects it if any metric axiom fails.
    pub fn to_space(&self) -> Result<FiniteMetricSpace, CliError> {
        let space = self.build()?;
        if let Some(v) = validate_space(&space).first() {
            return Err(usage(format!("invalid metric space: {v:?}")));
        }
        Ok(space)
    }

    fn build(&self) -> Result<FiniteMetricSpace, CliError> {
        let mut space = match &self.metric {
            MetricFile::Matrix { distances } => {
                let (n, data) = matrix_data(distances)?;
                FiniteMetricSpace::from_matrix(n, data)?
            }
            MetricFile::Euclidean { coords } => FiniteMetricSpace::euclidean(coords)?,
            MetricFile::Circle { coords } => FiniteMetricSpace::new(Metric::Circle { coords: coords.clone() })?,
            MetricFile::CircleGrid { size } => FiniteMetricSpace::circle_grid(*size)?,
            MetricFile::MaxProduct { left, right } => FiniteMetricSpace::max_product(left.build()?, right.build()?)?,
        };
        if let Some(points) = &self.points {
            if points.len() != space.len() {
                return Err(usage(format!(
                    "{} point labels given for a metric on {} points",
                    points.len(),
                    space.len()
                )));
            }
            space = space.with_labels(points.iter().map(LabelFile::to_label).collect());
        }
        if let Some(c) = self.scale {
            space = lebdyn_core::metric::scale_metric(&space, c)?;
        }
        Ok(space)
    }

    pub fn from_space(space: &FiniteMetricSpace) -> Self {
        let metric = match space.metric() {
            Metric::Matrix { n, data } => {
                MetricFile::Matrix { distances: data.chunks(*n).map(<[f64]>::to_vec).collect() }
            }
            Metric::Euclidean { dim, coords } => {
                MetricFile::Euclidean { coords: coords.chunks(*dim).map(<[f64]>::to_vec).collect() }
            }
            Metric::Circle { coords } => MetricFile::Circle { coords: coords.clone() },
            Metric::CircleGrid { size } => MetricFile::CircleGrid { size: *size },
            Metric::MaxProduct { left, right } => MetricFile::MaxProduct {
                left: Box::new(SpaceFile::from_space(left)),
                right: Box::new(SpaceFile::from_space(right)),
            },
        };
        let labels = space.labels();
        let points = if labels.iter().all(|l| *l == Label::None) {
            None
        } else {
            Some(labels.iter().map(LabelFile::from_label).collect())
        };
        let scale = (space.scale() != 1.0).then_some(space.scale());
        SpaceFile { points, metric, scale }
    }
}

impl CoverFile {
    pub fn to_cover(&self, point_count: usize) -> Result<Cover, CliError> {
        let members = self.members.iter().map(|m| PointSet::new(m.clone())).collect();
        Ok(Cover::new(point_count, members)?)
    }

    pub fn from_cover(cover: &Cover) -> Self {
        CoverFile { members: cover.members().iter().map(|m| m.as_slice().to_vec()).collect() }
    }
}

impl MapFile {
    pub fn to_map(&self) -> Result<DynMap, CliError> {
        Ok(DynMap::new(self.image.clone())?)
    }

    pub fn from_map(map: &DynMap) -> Self {
        MapFile { image: map.image().to_vec() }
    }
}

/// A parameter from JSON: integers, reals, or a nested spec object.
pub fn param_from_json(key: &str, v: &Value) -> Result<ParamValue, CliError> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(ParamValue::Int(i))
            } else if let Some(x) = n.as_f64() {
                Ok(ParamValue::Real(x))
            } else {
                Err(usage(format!("parameter `{key}`: number out of range")))
            }
        }
        Value::Object(_) => {
            let nested: SpecFile =
                serde_json::from_value(v.clone()).map_err(|e| usage(format!("parameter `{key}`: {e}")))?;
            Ok(ParamValue::Spec(Box::new(nested.to_spec()?)))
        }
        _ => Err(usage(format!("parameter `{key}` must be a number or a spec object"))),
    }
}

pub fn param_to_json(v: &ParamValue) -> Value {
    match v {
        ParamValue::Int(i) => Value::from(*i),
        ParamValue::Real(x) => Value::from(*x),
        ParamValue::Spec(s) => serde_json::to_value(SpecFile::from_spec(s)).expect("spec serializes"),
    }
}

impl SpecFile {
    pub fn to_spec(&self) -> Result<SystemSpec, CliError> {
        let mut spec = SystemSpec::new(Family::from_name(&self.family)?);
        for (k, v) in &self.params {
            spec = spec.with_param(k, param_from_json(k, v)?);
        }
        Ok(spec.radii(&self.mesh_radii).horizon(self.horizon))
    }

    pub fn from_spec(spec: &SystemSpec) -> Self {
        SpecFile {
            family: spec.family.name().to_string(),
            params: spec.params.iter().map(|(k, v)| (k.clone(), param_to_json(v))).collect(),
            mesh_radii: spec.mesh_radii.clone(),
            horizon: spec.horizon,
            known: BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_triangle_matches_full_matrix() {
        let full = SpaceFile {
            points: None,
            metric: MetricFile::Matrix {
                distances: vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.5], vec![2.0, 1.5, 0.0]],
            },
            scale: None,
        };
        let tri = SpaceFile {
            points: None,
            metric: MetricFile::Matrix { distances: vec![vec![], vec![1.0], vec![2.0, 1.5]] },
            scale: None,
        };
        let a = full.to_space().unwrap();
        let b = tri.to_space().unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(a.dist(x, y), b.dist(x, y));
            }
        }
    }

    #[test]
    fn triangle_violation_is_rejected() {
        let bad = SpaceFile {
            points: None,
            metric: MetricFile::Matrix { distances: vec![vec![], vec![1.0], vec![5.0, 1.0]] },
            scale: None,
        };
        assert!(matches!(bad.to_space(), Err(CliError::Usage(_))));
    }

    #[test]
    fn labels_round_trip() {
        let text = r#"{"points":[null,"a",[0.5]],"metric":{"kind":"circle","coords":[0.0,0.25,0.5]}}"#;
        let file: SpaceFile = serde_json::from_str(text).unwrap();
        let space = file.to_space().unwrap();
        assert_eq!(space.labels()[1], Label::Text("a".into()));
        assert_eq!(SpaceFile::from_space(&space), file);
    }

    #[test]
    fn nested_spec_param() {
        let text = r#"{"family":"product","params":{"left":{"family":"xa","params":{"p":2,"q":4}}}}"#;
        let file: SpecFile = serde_json::from_str(text).unwrap();
        let spec = file.to_spec().unwrap();
        assert!(matches!(spec.params.get("left"), Some(ParamValue::Spec(_))));
        let back = SpecFile::from_spec(&spec);
        assert_eq!(back.to_spec().unwrap(), spec);
    }
}
