//! JSON model documents.
//!
//! ```json
//! {"geometry": "symmetric", "K": 0.1, "Ec": 0.1, "gamma_up": 100, "bias": 1, "flux_ratio": 0.25}
//! ```
//!
//! or an explicit network:
//!
//! ```json
//! {"geometry": "custom", "n_modes": 2, "gamma": 1, "gamma_up": [2, 1],
//!  "tunneling": [{"from": 0, "to": 1, "re": 0.5, "im": 0}]}
//! ```

use serde::{Deserialize, Serialize};

use super::{build_asymmetric_pump, build_symmetric_pump, BiasSplit, NetworkModel, PumpParams};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{c, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Symmetric,
    Asymmetric,
    Custom,
}

impl Geometry {
    pub fn as_str(self) -> &'static str {
        match self {
            Geometry::Symmetric => "symmetric",
            Geometry::Asymmetric => "asymmetric",
            Geometry::Custom => "custom",
        }
    }

    /// Builds one of the two pump presets; `Custom` has no parametric builder.
    pub fn build<T: Real>(self, params: &PumpParams<T>) -> Result<NetworkModel<T>> {
        match self {
            Geometry::Symmetric => build_symmetric_pump(params),
            Geometry::Asymmetric => build_asymmetric_pump(params),
            Geometry::Custom => Err(Error::InvalidParameter(
                "custom geometry has no pump preset".into(),
            )),
        }
    }
}

impl std::str::FromStr for Geometry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Geometry::Symmetric),
            "asymmetric" => Ok(Geometry::Asymmetric),
            "custom" => Ok(Geometry::Custom),
            other => Err(Error::InvalidParameter(format!("unknown geometry `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScalarOrArray {
    Scalar(f64),
    Array(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TunnelingEntry {
    from: usize,
    to: usize,
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacitanceEntry {
    i: usize,
    j: usize,
    value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    geometry: Geometry,
    #[serde(rename = "K")]
    k: Option<f64>,
    #[serde(rename = "Ec")]
    ec: Option<f64>,
    gamma: Option<f64>,
    gamma_up: Option<ScalarOrArray>,
    bias: Option<f64>,
    flux_ratio: Option<f64>,
    bias_split: Option<BiasSplit>,
    n_modes: Option<usize>,
    epsilon: Option<Vec<f64>>,
    tunneling: Option<Vec<TunnelingEntry>>,
    capacitance: Option<Vec<CapacitanceEntry>>,
    mode_labels: Option<Vec<String>>,
}

/// A parsed document: either a pump preset or an explicit network.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelDocument {
    Preset {
        geometry: Geometry,
        params: PumpParams<f64>,
    },
    Custom(NetworkModel<f64>),
}

impl ModelDocument {
    pub fn build<T: Real>(&self) -> Result<NetworkModel<T>> {
        match self {
            ModelDocument::Preset { geometry, params } => geometry.build(&convert_params(params)),
            ModelDocument::Custom(m) => convert_model(m).validated(),
        }
    }
}

fn convert_params<T: Real>(p: &PumpParams<f64>) -> PumpParams<T> {
    PumpParams {
        k: T::lit(p.k),
        e_c: T::lit(p.e_c),
        gamma_up_base: T::lit(p.gamma_up_base),
        bias: T::lit(p.bias),
        flux: super::FluxSpec::new(T::lit(p.flux.flux_ratio)),
        gamma: T::lit(p.gamma),
        epsilon: T::lit(p.epsilon),
        bias_split: p.bias_split,
    }
}

fn convert_model<T: Real>(m: &NetworkModel<f64>) -> NetworkModel<T> {
    let n = m.n_modes();
    NetworkModel {
        epsilon: m.epsilon.iter().map(|&x| T::lit(x)).collect(),
        tunneling: CMatrix::from_fn(n, |r, k| {
            let z = m.tunneling[(r, k)];
            c(T::lit(z.re), T::lit(z.im))
        }),
        capacitance: m
            .capacitance
            .iter()
            .map(|row| row.iter().map(|&x| T::lit(x)).collect())
            .collect(),
        gamma_up: m.gamma_up.iter().map(|&x| T::lit(x)).collect(),
        gamma: T::lit(m.gamma),
        mode_labels: m.mode_labels.clone(),
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn require<V>(value: Option<V>, key: &str) -> Result<V> {
    value.ok_or_else(|| schema(key, format!("missing field `{key}`")))
}

fn forbid<V>(value: &Option<V>, key: &str, geometry: Geometry) -> Result<()> {
    if value.is_some() {
        return Err(schema(
            key,
            format!("`{key}` is not allowed for geometry `{}`", geometry.as_str()),
        ));
    }
    Ok(())
}

/// Parses and schema-checks a document without building the model.
pub fn parse_document(text: &str) -> Result<ModelDocument> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;
    match raw.geometry {
        Geometry::Symmetric | Geometry::Asymmetric => preset(raw),
        Geometry::Custom => custom(raw),
    }
}

fn preset(raw: RawDocument) -> Result<ModelDocument> {
    let g = raw.geometry;
    forbid(&raw.n_modes, "n_modes", g)?;
    forbid(&raw.epsilon, "epsilon", g)?;
    forbid(&raw.tunneling, "tunneling", g)?;
    forbid(&raw.capacitance, "capacitance", g)?;
    forbid(&raw.mode_labels, "mode_labels", g)?;
    let gamma_up = match require(raw.gamma_up, "gamma_up")? {
        ScalarOrArray::Scalar(x) => x,
        ScalarOrArray::Array(_) => {
            return Err(schema(
                "gamma_up",
                "pump presets take a scalar baseline creation rate",
            ))
        }
    };
    let params = PumpParams {
        k: require(raw.k, "K")?,
        e_c: require(raw.ec, "Ec")?,
        gamma_up_base: gamma_up,
        bias: require(raw.bias, "bias")?,
        flux: super::FluxSpec::new(require(raw.flux_ratio, "flux_ratio")?),
        gamma: raw.gamma.unwrap_or(1.0),
        epsilon: 0.0,
        bias_split: raw.bias_split.unwrap_or_default(),
    };
    params.check().map_err(|e| schema(".", e.to_string()))?;
    Ok(ModelDocument::Preset { geometry: g, params })
}

fn custom(raw: RawDocument) -> Result<ModelDocument> {
    let g = raw.geometry;
    forbid(&raw.k, "K", g)?;
    forbid(&raw.ec, "Ec", g)?;
    forbid(&raw.bias, "bias", g)?;
    forbid(&raw.flux_ratio, "flux_ratio", g)?;
    forbid(&raw.bias_split, "bias_split", g)?;
    let n = require(raw.n_modes, "n_modes")?;
    if n == 0 {
        return Err(schema("n_modes", "must be positive"));
    }
    let gamma = require(raw.gamma, "gamma")?;
    let gamma_up = match require(raw.gamma_up, "gamma_up")? {
        ScalarOrArray::Scalar(x) => vec![x; n],
        ScalarOrArray::Array(v) if v.len() == n => v,
        ScalarOrArray::Array(v) => {
            return Err(schema(
                "gamma_up",
                format!("expected {n} entries, found {}", v.len()),
            ))
        }
    };
    let epsilon = match raw.epsilon {
        None => vec![0.0; n],
        Some(v) if v.len() == n => v,
        Some(v) => {
            return Err(schema(
                "epsilon",
                format!("expected {n} entries, found {}", v.len()),
            ))
        }
    };
    let mut t = CMatrix::<f64>::zeros(n);
    let mut set = vec![false; n * n];
    for (i, e) in raw.tunneling.unwrap_or_default().iter().enumerate() {
        let path = format!("tunneling[{i}]");
        if e.from >= n || e.to >= n {
            return Err(schema(path, format!("mode index out of range for {n} modes")));
        }
        if e.from == e.to {
            return Err(schema(path, "self-tunneling is not allowed"));
        }
        let amp = c(e.re, e.im);
        for (r, k, v) in [(e.from, e.to, amp), (e.to, e.from, amp.conj())] {
            if set[r * n + k] && t[(r, k)] != v {
                return Err(schema(
                    path.clone(),
                    format!("conflicts with an earlier entry for ({r}, {k})"),
                ));
            }
            t[(r, k)] = v;
            set[r * n + k] = true;
        }
    }
    let mut cap = vec![vec![0.0; n]; n];
    let mut cap_set = vec![false; n * n];
    for (idx, e) in raw.capacitance.unwrap_or_default().iter().enumerate() {
        let path = format!("capacitance[{idx}]");
        if e.i >= n || e.j >= n {
            return Err(schema(path, format!("mode index out of range for {n} modes")));
        }
        if e.i == e.j {
            return Err(schema(path, "diagonal charging energy is not allowed"));
        }
        if cap_set[e.i * n + e.j] && cap[e.i][e.j] != e.value {
            return Err(schema(path, "conflicts with an earlier entry"));
        }
        cap[e.i][e.j] = e.value;
        cap[e.j][e.i] = e.value;
        cap_set[e.i * n + e.j] = true;
        cap_set[e.j * n + e.i] = true;
    }
    let model = NetworkModel {
        epsilon,
        tunneling: t,
        capacitance: cap,
        gamma_up,
        gamma,
        mode_labels: raw.mode_labels,
    };
    Ok(ModelDocument::Custom(model.validated()?))
}

/// Parses, schema-checks, builds and validates a model document.
pub fn load_model<T: Real>(text: &str) -> Result<NetworkModel<T>> {
    parse_document(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_document_matches_builder() {
        let doc = r#"{"geometry":"symmetric","K":0.1,"Ec":0.1,"gamma_up":100,"bias":1,"flux_ratio":0.25}"#;
        let m: NetworkModel<f64> = load_model(doc).unwrap();
        let direct = build_symmetric_pump(&PumpParams::new(0.1, 0.1, 100.0, 1.0, 0.25)).unwrap();
        assert_eq!(m, direct);
    }

    #[test]
    fn preset_bias_split_key() {
        let doc = r#"{"geometry":"asymmetric","K":0.1,"Ec":0,"gamma_up":100,"bias":1,"flux_ratio":0,"bias_split":"symmetric","gamma":2}"#;
        let m: NetworkModel<f64> = load_model(doc).unwrap();
        assert_eq!(m.gamma_up, vec![100.5, 100.0, 99.5, 100.0]);
        assert_eq!(m.gamma, 2.0);
    }

    #[test]
    fn explicit_two_mode_document() {
        let doc = r#"{"geometry":"custom","n_modes":2,"gamma":1,"gamma_up":[2,1],
                      "tunneling":[{"from":0,"to":1,"re":0.5,"im":0}]}"#;
        let m: NetworkModel<f64> = load_model(doc).unwrap();
        assert_eq!(m.n_modes(), 2);
        assert_eq!(m.tunneling[(0, 1)], c(0.5, 0.0));
        assert_eq!(m.tunneling[(1, 0)], c(0.5, 0.0));
        assert_eq!(m.gamma_up, vec![2.0, 1.0]);
    }

    #[test]
    fn hermitian_closure_of_complex_entries() {
        let doc = r#"{"geometry":"custom","n_modes":3,"gamma":1,"gamma_up":1,
                      "tunneling":[{"from":0,"to":2,"re":0.1,"im":0.2},{"from":2,"to":0,"re":0.1,"im":-0.2}],
                      "capacitance":[{"i":0,"j":1,"value":0.3}]}"#;
        let m: NetworkModel<f64> = load_model(doc).unwrap();
        assert_eq!(m.tunneling[(2, 0)], c(0.1, -0.2));
        assert_eq!(m.capacitance[1][0], 0.3);
        assert!(m.validate().is_valid());
    }

    #[test]
    fn missing_gamma_is_a_schema_error() {
        let doc = r#"{"geometry":"custom","n_modes":2,"gamma_up":[2,1]}"#;
        match load_model::<f64>(doc) {
            Err(Error::Schema { path, message }) => {
                assert_eq!(path, "gamma");
                assert!(message.contains("gamma"));
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let doc = r#"{"geometry":"symmetric","K":0.1,"Ec":0.1,"gamma_up":100,"bias":1,"flux_ratio":0.25,"phi":3}"#;
        assert!(matches!(load_model::<f64>(doc), Err(Error::Schema { .. })));
        let doc = r#"{"geometry":"custom","n_modes":2,"gamma":1,"gamma_up":1,
                      "tunneling":[{"from":0,"to":1,"re":0.5,"phase":1}]}"#;
        match load_model::<f64>(doc) {
            Err(Error::Schema { path, .. }) => assert!(path.starts_with("tunneling[0]"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_errors_carry_paths() {
        let doc = r#"{"geometry":"custom","n_modes":2,"gamma":1,"gamma_up":1,
                      "capacitance":[{"i":0,"j":1,"value":"big"}]}"#;
        match load_model::<f64>(doc) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "capacitance[0].value"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invariant_violations_delegate_to_validate() {
        let doc = r#"{"geometry":"custom","n_modes":2,"gamma":1,"gamma_up":[1,-1]}"#;
        assert!(matches!(load_model::<f64>(doc), Err(Error::InvalidModel(_))));
        let doc = r#"{"geometry":"custom","n_modes":2,"gamma":1,"gamma_up":1,
                      "tunneling":[{"from":0,"to":1,"re":1},{"from":1,"to":0,"re":2}]}"#;
        assert!(matches!(load_model::<f64>(doc), Err(Error::Schema { .. })));
    }

    #[test]
    fn geometry_specific_keys() {
        let doc = r#"{"geometry":"symmetric","K":0.1,"Ec":0.1,"gamma_up":100,"bias":1,"flux_ratio":0.25,"n_modes":4}"#;
        assert!(matches!(load_model::<f64>(doc), Err(Error::Schema { .. })));
        let doc = r#"{"geometry":"symmetric","K":0.1,"gamma_up":100,"bias":1,"flux_ratio":0.25}"#;
        match load_model::<f64>(doc) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "Ec"),
            other => panic!("{other:?}"),
        }
    }
}
