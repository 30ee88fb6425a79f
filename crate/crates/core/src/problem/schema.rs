//! JSON instance files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    BilinearFormSpec, GammaSpec, HFunctionSpec, HypothesisProfile, LambdaSet, OperatorSpec,
    PowerTerm, ProblemInstance, SpaceDims,
};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::nonsmooth::{CoordinateFunction, PiecewiseC1Spec};

/// Matrices are accepted either as nested rows or as a flat row-major array.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixDoc {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixDoc {
    fn from_matrix(m: &Matrix) -> Self {
        MatrixDoc::Rows(
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect(),
        )
    }

    fn into_matrix(self, what: &str, rows: usize, cols: usize) -> Result<Matrix> {
        match self {
            MatrixDoc::Rows(r) => {
                let got_cols = r.first().map_or(0, Vec::len);
                if r.iter().any(|row| row.len() != got_cols) {
                    return Err(Error::Shape(format!("{what} has ragged rows")));
                }
                if r.len() != rows || got_cols != cols {
                    return Err(Error::Shape(format!(
                        "{what} is {}x{got_cols}, expected {rows}x{cols}",
                        r.len()
                    )));
                }
                Ok(Matrix::from_fn(rows, cols, |i, j| r[i][j]))
            }
            MatrixDoc::Flat(v) => {
                if v.len() != rows * cols {
                    return Err(Error::Shape(format!(
                        "{what} has {} entries, expected {rows}x{cols}",
                        v.len()
                    )));
                }
                Ok(Matrix::from_row_slice(rows, cols, &v))
            }
        }
    }

    /// Row count, needed for polyhedra whose row count is not fixed by dims.
    fn rows(&self, cols: usize) -> usize {
        match self {
            MatrixDoc::Rows(r) => r.len(),
            MatrixDoc::Flat(v) if cols > 0 => v.len() / cols,
            MatrixDoc::Flat(_) => 0,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimsDoc {
    n: usize,
    m: usize,
    k: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerDoc {
    p: f64,
    c: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorDoc {
    #[serde(rename = "P")]
    p: MatrixDoc,
    #[serde(default)]
    power: Option<PowerDoc>,
    #[serde(rename = "m_A", default)]
    m_a: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaDoc {
    #[serde(rename = "G")]
    g: MatrixDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BDoc {
    #[serde(rename = "B")]
    b: MatrixDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LambdaDoc {
    variant: String,
    #[serde(default)]
    params: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyParams {}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxParams {
    upper: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyParams {
    #[serde(rename = "C")]
    c: MatrixDoc,
    d: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HDoc {
    form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    theta: f64,
    #[serde(rename = "alpha_J")]
    alpha_j: f64,
    #[serde(rename = "beta_J")]
    beta_j: f64,
    #[serde(rename = "m_J")]
    m_j: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    dims: DimsDoc,
    #[serde(rename = "A")]
    a: OperatorDoc,
    #[serde(rename = "J")]
    j: Vec<CoordinateFunction>,
    gamma: GammaDoc,
    b: BDoc,
    lambda_set: LambdaDoc,
    f: Vec<f64>,
    h: HDoc,
    profile: ProfileDoc,
}

fn params<T: for<'de> Deserialize<'de>>(value: Value, variant: &str) -> Result<T> {
    let value = if value.is_null() { Value::Object(Default::default()) } else { value };
    serde_json::from_value(value).map_err(|e| Error::Parse(format!("lambda_set params for {variant}: {e}")))
}

/// Parse and validate an instance document.
pub fn instance_from_json(text: &str) -> Result<ProblemInstance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| {
        // errors raised inside the J schema surface as serde messages
        Error::Parse(e.to_string())
    })?;
    let dims = SpaceDims::new(doc.dims.n, doc.dims.m, doc.dims.k)?;
    let SpaceDims { n, m, k } = dims;

    let p = doc.a.p.into_matrix("A.P", n, n)?;
    let a = OperatorSpec {
        p,
        power: doc.a.power.map(|pw| PowerTerm { p: pw.p, c: pw.c }),
        declared_m_a: doc.a.m_a,
    };
    let g = doc.gamma.g.into_matrix("gamma.G", k, n)?;
    let b = doc.b.b.into_matrix("b.B", m, n)?;
    if doc.j.len() != k {
        return Err(Error::Shape(format!("J has {} coordinates, expected {k}", doc.j.len())));
    }
    let j = PiecewiseC1Spec::new(doc.j)?;
    if doc.f.len() != n {
        return Err(Error::Shape(format!("f has length {}, expected {n}", doc.f.len())));
    }
    let f = Vector::from_vec(doc.f);

    let variant = doc.lambda_set.variant.as_str();
    let lambda = match variant {
        "orthant" | "nonnegative_orthant" => {
            let _: EmptyParams = params(doc.lambda_set.params, variant)?;
            LambdaSet::NonnegativeOrthant
        }
        "box" => {
            let bp: BoxParams = params(doc.lambda_set.params, variant)?;
            if bp.upper.len() != m {
                return Err(Error::Shape(format!("box bound has length {}, expected {m}", bp.upper.len())));
            }
            LambdaSet::boxed(Vector::from_vec(bp.upper))?
        }
        "polyhedron" => {
            let pp: PolyParams = params(doc.lambda_set.params, variant)?;
            let rows = pp.c.rows(m);
            let c = pp.c.into_matrix("lambda_set.C", rows, m)?;
            LambdaSet::polyhedron(c, Vector::from_vec(pp.d))?
        }
        other => return Err(Error::Parse(format!("unknown lambda_set variant {other:?}"))),
    };

    let h = match doc.h.form.as_str() {
        "power" => {
            let c_h = doc.h.c_h.ok_or_else(|| Error::Parse("h.c_h is required for the power form".into()))?;
            let tau = doc.h.tau.ok_or_else(|| Error::Parse("h.tau is required for the power form".into()))?;
            HFunctionSpec::power(c_h, tau)?
        }
        "zero" => HFunctionSpec::Zero,
        other => return Err(Error::Parse(format!("unknown h form {other:?}"))),
    };
    let profile = HypothesisProfile::declared(
        doc.profile.theta,
        doc.profile.alpha_j,
        doc.profile.beta_j,
        doc.profile.m_j,
    )?;
    ProblemInstance::new(a, j, GammaSpec::new(g), BilinearFormSpec { b }, lambda, f, h, profile)
}

pub fn instance_to_json(inst: &ProblemInstance) -> String {
    let lambda_set = match &inst.lambda {
        LambdaSet::NonnegativeOrthant => LambdaDoc {
            variant: "orthant".into(),
            params: Value::Object(Default::default()),
        },
        LambdaSet::Box { upper } => LambdaDoc {
            variant: "box".into(),
            params: serde_json::to_value(BoxParams {
                upper: upper.iter().copied().collect(),
            })
            .expect("serializable"),
        },
        LambdaSet::Polyhedron { c, d } => LambdaDoc {
            variant: "polyhedron".into(),
            params: serde_json::to_value(PolyParams {
                c: MatrixDoc::from_matrix(c),
                d: d.iter().copied().collect(),
            })
            .expect("serializable"),
        },
    };
    let h = match inst.h {
        HFunctionSpec::PowerNorm { c_h, tau } => HDoc {
            form: "power".into(),
            c_h: Some(c_h),
            tau: Some(tau),
        },
        HFunctionSpec::Zero => HDoc {
            form: "zero".into(),
            c_h: None,
            tau: None,
        },
    };
    let doc = InstanceDoc {
        dims: DimsDoc {
            n: inst.dims.n,
            m: inst.dims.m,
            k: inst.dims.k,
        },
        a: OperatorDoc {
            p: MatrixDoc::from_matrix(&inst.a.p),
            power: inst.a.power.map(|pw| PowerDoc { p: pw.p, c: pw.c }),
            m_a: inst.a.declared_m_a,
        },
        j: inst.j.coords().to_vec(),
        gamma: GammaDoc {
            g: MatrixDoc::from_matrix(inst.gamma.matrix()),
        },
        b: BDoc {
            b: MatrixDoc::from_matrix(&inst.b.b),
        },
        lambda_set,
        f: inst.f.iter().copied().collect(),
        h,
        profile: ProfileDoc {
            theta: inst.profile.theta,
            alpha_j: inst.profile.alpha_j,
            beta_j: inst.profile.beta_j,
            m_j: inst.profile.m_j,
        },
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path)?;
    instance_from_json(&text)
}

pub fn save_instance(inst: &ProblemInstance, path: &Path) -> Result<()> {
    fs::write(path, instance_to_json(inst))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dims": {"n": 1, "m": 1, "k": 1},
        "A": {"P": [[2.0]], "power": null, "m_A": 2.0},
        "J": [{"breakpoints": [0.0], "pieces": [
            {"kind": "abs", "w": 1.0, "at": 0.0, "q": -0.5},
            {"kind": "abs", "w": 1.0, "at": 0.0, "q": -0.5}
        ]}],
        "gamma": {"G": [[1.0]]},
        "b": {"B": [[1.0]]},
        "lambda_set": {"variant": "orthant", "params": {}},
        "f": [3.0],
        "h": {"form": "power", "c_h": 1.5, "tau": 2.0},
        "profile": {"theta": 2.0, "alpha_J": 0.0, "beta_J": 0.5, "m_J": 0.5}
    }"#;

    #[test]
    fn minimal_instance_parses() {
        let inst = instance_from_json(MINIMAL).unwrap();
        assert_eq!(inst.dims, SpaceDims { n: 1, m: 1, k: 1 });
        assert_eq!(inst.profile.alpha_b, 1.0);
        assert_eq!(inst.j.eval(&Vector::from_element(1, 2.0)), 1.0);
    }

    #[test]
    fn round_trip_is_identity() {
        let inst = instance_from_json(MINIMAL).unwrap();
        let again = instance_from_json(&instance_to_json(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn flat_matrices_are_row_major() {
        let text = MINIMAL
            .replace(r#""n": 1, "m": 1, "k": 1"#, r#""n": 2, "m": 1, "k": 1"#)
            .replace(r#""P": [[2.0]]"#, r#""P": [2.0, 1.0, 0.0, 3.0]"#)
            .replace(r#""G": [[1.0]]"#, r#""G": [1.0, 0.0]"#)
            .replace(r#""B": [[1.0]]"#, r#""B": [0.0, 1.0]"#)
            .replace(r#""f": [3.0]"#, r#""f": [3.0, 1.0]"#);
        let inst = instance_from_json(&text).unwrap();
        assert_eq!(inst.a.p[(0, 1)], 1.0);
        assert_eq!(inst.a.p[(1, 0)], 0.0);
    }

    #[test]
    fn negative_box_bound_is_a_hypothesis_error() {
        let text = MINIMAL.replace(
            r#"{"variant": "orthant", "params": {}}"#,
            r#"{"variant": "box", "params": {"upper": [-1.0]}}"#,
        );
        assert!(matches!(instance_from_json(&text), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn wrong_b_shape_is_a_shape_error() {
        let text = MINIMAL.replace(r#""B": [[1.0]]"#, r#""B": [[1,0,0],[0,1,0]]"#);
        assert!(matches!(instance_from_json(&text), Err(Error::Shape(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace(r#""f": [3.0],"#, r#""f": [3.0], "extra": 1,"#);
        assert!(matches!(instance_from_json(&text), Err(Error::Parse(_))));
        let text = MINIMAL.replace(r#""m_J": 0.5"#, r#""m_J": 0.5, "m_X": 1"#);
        assert!(matches!(instance_from_json(&text), Err(Error::Parse(_))));
        let text = MINIMAL.replace(r#""params": {}"#, r#""params": {"upper": [1.0]}"#);
        assert!(matches!(instance_from_json(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn bad_h_is_a_hypothesis_error() {
        let text = MINIMAL.replace(r#""c_h": 1.5"#, r#""c_h": -1.0"#);
        assert!(matches!(instance_from_json(&text), Err(Error::Hypothesis(_))));
        let text = MINIMAL.replace(r#""tau": 2.0"#, r#""tau": 1.0"#);
        assert!(matches!(instance_from_json(&text), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(instance_from_json("{"), Err(Error::Parse(_))));
        let text = MINIMAL.replace(r#""kind": "abs""#, r#""kind": "cubic""#);
        assert!(matches!(instance_from_json(&text), Err(Error::Parse(_))));
    }
}
