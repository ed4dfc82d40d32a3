//! Loading model documents (JSON) into validated specs.
//!
//! ```json
//! {
//!   "family": "birth_death",
//!   "params": { "birth": "1", "death": "(i+1)^2" },
//!   "numerics": { "rel": 1e-10, "truncation": 400 }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::expr::RateFunction;
use super::spec::{
    BirthDeathSpec, DiffusionSpec, DriftProfile, ModelSpec, RadialSpec, SingleDeathSpec, SingleDeathTail,
    StableSdeSpec, TimeChangedStableSpec, TreeNode, TreeRay, TreeSpec,
};
use crate::numerics::Tolerance;
use crate::{Error, Result};

/// A loaded model with its numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDocument {
    pub spec: ModelSpec,
    pub tolerance: Tolerance,
    /// Default truncation size (chains) or mesh count hint for oracles.
    pub truncation: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    family: String,
    params: Value,
    #[serde(default)]
    numerics: Option<RawNumerics>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    rel: Option<f64>,
    abs: Option<f64>,
    max_terms: Option<usize>,
    max_evals: Option<usize>,
    truncation: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBirthDeath {
    birth: String,
    death: String,
    states: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSingleDeath {
    dimension: usize,
    q: RawSingleDeathRates,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSingleDeathRates {
    #[serde(default)]
    table: Vec<(usize, usize, f64)>,
    tail: Option<RawSingleDeathTail>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSingleDeathTail {
    down: String,
    #[serde(default)]
    up: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTree {
    nodes: Vec<RawTreeNode>,
    #[serde(default)]
    tail: Vec<RawTreeRay>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTreeNode {
    parent: Option<usize>,
    #[serde(default)]
    up: Option<f64>,
    #[serde(default)]
    down: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTreeRay {
    from: usize,
    up: String,
    down: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiffusion {
    #[serde(default)]
    domain: Option<String>,
    a: Option<String>,
    b: Option<String>,
    beta: Option<String>,
    r0: Option<f64>,
    #[serde(rename = "D")]
    outer: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStable {
    alpha: f64,
    dim: usize,
    drift_radial: Option<String>,
    drift: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTcStable {
    alpha: f64,
    a: String,
}

/// Reads and validates a model document from disk.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_model(&text)
}

/// Parses and validates a model document held in memory.
pub fn parse_model(text: &str) -> Result<ModelDocument> {
    let raw: RawDocument = serde_json::from_str(text).map_err(json_error)?;
    let numerics = raw.numerics.unwrap_or_default();
    let mut tolerance = Tolerance::default();
    if let Some(v) = numerics.rel {
        tolerance.rel = v;
    }
    if let Some(v) = numerics.abs {
        tolerance.abs = v;
    }
    if let Some(v) = numerics.max_terms {
        tolerance.max_terms = v;
    }
    if let Some(v) = numerics.max_evals {
        tolerance.max_evals = v;
    }
    tolerance.validate()?;

    let spec = match raw.family.as_str() {
        "birth_death" => {
            let p: RawBirthDeath = params(raw.params)?;
            ModelSpec::BirthDeath(BirthDeathSpec::new(expr(&p.birth, "i")?, expr(&p.death, "i")?, p.states)?)
        }
        "single_death" => {
            let p: RawSingleDeath = params(raw.params)?;
            let tail = match p.q.tail {
                Some(t) => Some(SingleDeathTail {
                    down: expr(&t.down, "i")?,
                    up: t.up.iter().map(|u| expr(u, "i")).collect::<Result<_>>()?,
                }),
                None => None,
            };
            ModelSpec::SingleDeath(SingleDeathSpec::new(p.dimension, &p.q.table, tail)?)
        }
        "tree" => {
            let p: RawTree = params(raw.params)?;
            let mut nodes = Vec::with_capacity(p.nodes.len());
            for (j, n) in p.nodes.into_iter().enumerate() {
                let (up, down) = match (n.parent, n.up, n.down) {
                    (None, _, _) => (0.0, 0.0),
                    (Some(_), Some(u), Some(d)) => (u, d),
                    _ => return Err(Error::Schema(format!("params.nodes[{j}]: non-root nodes need `up` and `down`"))),
                };
                nodes.push(TreeNode {
                    parent: n.parent,
                    up,
                    down,
                });
            }
            let rays = p
                .tail
                .into_iter()
                .map(|r| {
                    Ok(TreeRay {
                        from: r.from,
                        up: expr(&r.up, "i")?,
                        down: expr(&r.down, "i")?,
                    })
                })
                .collect::<Result<_>>()?;
            ModelSpec::Tree(TreeSpec::new(nodes, rays)?)
        }
        "diffusion" => {
            let p: RawDiffusion = params(raw.params)?;
            match p.domain.as_deref() {
                None | Some("half_line") => {
                    if p.beta.is_some() || p.r0.is_some() || p.outer.is_some() {
                        return Err(Error::Schema("half-line diffusion takes only `a` and `b`".into()));
                    }
                    let a = p.a.ok_or_else(|| missing("a"))?;
                    let b = p.b.ok_or_else(|| missing("b"))?;
                    ModelSpec::Diffusion(DiffusionSpec::new(expr(&a, "x")?, expr(&b, "x")?)?)
                }
                Some("radial") => {
                    if p.a.is_some() || p.b.is_some() {
                        return Err(Error::Schema("radial diffusion takes `beta`, `r0` and optional `D`".into()));
                    }
                    let beta = p.beta.ok_or_else(|| missing("beta"))?;
                    let r0 = p.r0.ok_or_else(|| missing("r0"))?;
                    ModelSpec::RadialDiffusion(RadialSpec::new(expr(&beta, "r")?, r0, p.outer)?)
                }
                Some(other) => {
                    return Err(Error::Schema(format!(
                        "params.domain: expected `half_line` or `radial`, got `{other}`"
                    )))
                }
            }
        }
        "stable_sde" => {
            let p: RawStable = params(raw.params)?;
            let drift = match (p.drift_radial, p.drift) {
                (Some(g), None) => DriftProfile::Radial(expr(&g, "r")?),
                (None, Some(b)) => DriftProfile::Drift(expr(&b, "x")?),
                _ => return Err(Error::Schema("give exactly one of `drift_radial` and `drift`".into())),
            };
            ModelSpec::StableSde(StableSdeSpec::new(p.alpha, p.dim, drift)?)
        }
        "tc_stable" => {
            let p: RawTcStable = params(raw.params)?;
            ModelSpec::TcStable(TimeChangedStableSpec::new(p.alpha, expr(&p.a, "x")?)?)
        }
        other => {
            return Err(Error::Schema(format!(
                "unknown family `{other}`; expected one of birth_death, single_death, tree, diffusion, stable_sde, tc_stable"
            )))
        }
    };
    Ok(ModelDocument {
        spec,
        tolerance,
        truncation: numerics.truncation,
    })
}

fn json_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => Error::Schema(e.to_string()),
        _ => Error::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    }
}

fn params<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Schema(format!("params: {e}")))
}

fn expr(text: &str, var: &str) -> Result<RateFunction> {
    RateFunction::parse(text, var)
}

fn missing(field: &str) -> Error {
    Error::Schema(format!("params: missing field `{field}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_chain_reads_back() {
        let doc = parse_model(
            r#"{"family":"birth_death","params":{"birth":"1","death":"1","states":2},"numerics":{"truncation":2}}"#,
        )
        .unwrap();
        let ModelSpec::BirthDeath(bd) = &doc.spec else { panic!() };
        assert_eq!(bd.birth(0), 1.0);
        assert_eq!(bd.death(1), 1.0);
        assert_eq!(doc.truncation, Some(2));
    }

    #[test]
    fn zero_death_rate_is_an_invariant_violation() {
        let err = parse_model(r#"{"family":"birth_death","params":{"birth":"1","death":"0"}}"#).unwrap_err();
        assert!(matches!(err, Error::Invariant { ref at, .. } if at == "i=1"), "{err}");
    }

    #[test]
    fn schema_errors() {
        let err = parse_model(r#"{"family":"birth_death","params":{"birth":"1"}}"#).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("death")), "{err}");
        let err = parse_model(r#"{"family":"markov","params":{}}"#).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        let err = parse_model(r#"{"family":"birth_death","params":{"birth":"1","death":"1","extra":1}}"#).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        let err = parse_model(r#"{"family":"birth_death","params":{}, "other": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_model("{\n  \"family\": \"tree\",\n  oops\n}").unwrap_err();
        assert!(matches!(err, Error::Json { line: 3, .. }), "{err}");
    }

    #[test]
    fn bad_expression_reports_position() {
        let err = parse_model(r#"{"family":"diffusion","params":{"a":"1","b":"-4*x^^3"}}"#).unwrap_err();
        match err {
            Error::Parse { source, .. } => assert_eq!(source.pos, 5),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn every_family_loads() {
        let docs = [
            r#"{"family":"single_death","params":{"dimension":2,"q":{"table":[[0,1,1.0],[1,0,2.0]],"tail":{"down":"(i+1)^2","up":["1","0.5"]}}}}"#,
            r#"{"family":"tree","params":{"nodes":[{"parent":null},{"parent":0,"up":1,"down":2}],"tail":[{"from":1,"up":"1","down":"i^2"}]}}"#,
            r#"{"family":"diffusion","params":{"a":"1","b":"-4*x^3"}}"#,
            r#"{"family":"diffusion","params":{"domain":"radial","beta":"1/r - r","r0":1}}"#,
            r#"{"family":"stable_sde","params":{"alpha":1.5,"dim":1,"drift":"-x*abs(x)"}}"#,
            r#"{"family":"stable_sde","params":{"alpha":1.5,"dim":3,"drift_radial":"r"}}"#,
            r#"{"family":"tc_stable","params":{"alpha":1.5,"a":"(1+abs(x))^2"}}"#,
        ];
        for d in docs {
            let doc = parse_model(d).unwrap_or_else(|e| panic!("{d}: {e}"));
            doc.spec.validate().unwrap();
            doc.spec.validate().unwrap();
        }
    }

    #[test]
    fn numerics_overrides() {
        let doc = parse_model(r#"{"family":"tc_stable","params":{"alpha":1.5,"a":"2"},"numerics":{"rel":1e-6,"max_evals":500}}"#)
            .unwrap();
        assert_eq!(doc.tolerance.rel, 1e-6);
        assert_eq!(doc.tolerance.max_evals, 500);
        let err = parse_model(r#"{"family":"tc_stable","params":{"alpha":1.5,"a":"2"},"numerics":{"rel":0,"abs":0}}"#)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
