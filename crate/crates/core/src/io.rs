//! JSON interchange for models, counts, calibration sets and mitigation output.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so
//! every writer's output reads back bit-for-bit.
//!
//! Model documents carry `n` and a `format` tag:
//!
//! ```text
//! {"n": 2, "format": "dense",    "columns": [[p(00|00), p(01|00), ...], ...]}
//! {"n": 2, "format": "syndrome", "p_tilde": [p(00), p(01), p(10), p(11)]}
//! {"n": 2, "format": "tpn",      "rates": [[p(1|0), p(0|1)], ...], "symmetric": false}
//! {"n": 3, "format": "grouped",  "groups": [{"qubits": [2, 1], "p_tilde": [...]}, ...]}
//! ```
//!
//! Vectors are indexed by outcome value with qubit 0 as the least significant
//! bit; TPN rates are listed qubit 0 first. Counts are keyed by bit string,
//! highest qubit first.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bitstring::{format_bits, parse_bits};
use crate::calibration::{CalibrationSet, ProtocolTag};
use crate::counts::CountsTable;
use crate::error::{Error, Result};
use crate::mitigation::MitigationResult;
use crate::model::{GroupedModel, Model, ResponseMatrix, SyndromeDistribution, TpnModel};
use crate::wht::InverseCoefficients;

#[derive(Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase", deny_unknown_fields)]
enum ModelDoc {
    Dense { n: usize, columns: Vec<Vec<f64>> },
    Syndrome { n: usize, p_tilde: Vec<f64> },
    Tpn {
        n: usize,
        rates: Vec<[f64; 2]>,
        #[serde(default)]
        symmetric: bool,
    },
    Grouped { n: usize, groups: Vec<GroupDoc> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    qubits: Vec<usize>,
    p_tilde: Vec<f64>,
}

fn check_n(declared: usize, actual: usize) -> Result<()> {
    if declared != actual {
        return Err(Error::WidthMismatch { left: declared, right: actual });
    }
    Ok(())
}

fn bits_width(len: usize) -> Result<usize> {
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

impl ModelDoc {
    fn from_model(model: &Model) -> Self {
        match model {
            Model::Dense(m) => ModelDoc::Dense { n: m.n(), columns: m.columns().map(<[f64]>::to_vec).collect() },
            Model::Syndrome(d) => ModelDoc::Syndrome { n: d.n(), p_tilde: d.probabilities().to_vec() },
            Model::Tpn(t) => ModelDoc::Tpn {
                n: t.n(),
                rates: t.rates().iter().map(|&(a, b)| [a, b]).collect(),
                symmetric: t.is_symmetric(),
            },
            Model::Grouped(g) => ModelDoc::Grouped {
                n: g.n(),
                groups: g
                    .groups()
                    .iter()
                    .map(|grp| GroupDoc { qubits: grp.qubits.clone(), p_tilde: grp.distribution.probabilities().to_vec() })
                    .collect(),
            },
        }
    }

    fn into_model(self) -> Result<Model> {
        Ok(match self {
            ModelDoc::Dense { n, columns } => {
                check_n(n, bits_width(columns.len())?)?;
                ResponseMatrix::from_columns(n, columns)?.into()
            }
            ModelDoc::Syndrome { n, p_tilde } => {
                check_n(n, bits_width(p_tilde.len())?)?;
                SyndromeDistribution::new(n, p_tilde)?.into()
            }
            ModelDoc::Tpn { n, rates, symmetric } => {
                check_n(n, rates.len())?;
                if symmetric {
                    if let Some(q) = rates.iter().position(|r| r[0] != r[1]) {
                        return Err(Error::Format(format!("symmetric TPN model has unequal rates on qubit {q}")));
                    }
                    TpnModel::symmetric(rates.iter().map(|r| r[0]).collect())?.into()
                } else {
                    TpnModel::new(rates.iter().map(|r| (r[0], r[1])).collect())?.into()
                }
            }
            ModelDoc::Grouped { n, groups } => {
                let groups = groups
                    .into_iter()
                    .map(|g| {
                        check_n(g.qubits.len(), bits_width(g.p_tilde.len())?)?;
                        Ok((g.qubits.clone(), SyndromeDistribution::new(g.qubits.len(), g.p_tilde)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                GroupedModel::new(n, groups)?.into()
            }
        })
    }
}

pub fn model_to_json(model: &Model) -> String {
    serde_json::to_string_pretty(&ModelDoc::from_model(model)).expect("model documents always serialise")
}

pub fn model_from_json(text: &str) -> Result<Model> {
    serde_json::from_str::<ModelDoc>(text)?.into_model()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountsDoc {
    n: usize,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl CountsDoc {
    fn from_table(t: &CountsTable) -> Self {
        Self { n: t.n(), shots: t.shots(), counts: t.iter().map(|(o, k)| (t.label(o), k)).collect() }
    }

    fn into_table(self) -> Result<CountsTable> {
        let pairs = self
            .counts
            .iter()
            .map(|(label, &k)| {
                let (value, width) = parse_bits(label)?;
                check_n(self.n, width)?;
                Ok((value, k))
            })
            .collect::<Result<Vec<_>>>()?;
        CountsTable::with_total(self.n, self.shots, pairs)
    }
}

pub fn counts_to_json(t: &CountsTable) -> String {
    serde_json::to_string_pretty(&CountsDoc::from_table(t)).expect("counts always serialise")
}

pub fn counts_from_json(text: &str) -> Result<CountsTable> {
    serde_json::from_str::<CountsDoc>(text)?.into_table()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationEntry {
    input: String,
    n: usize,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ProtocolDoc {
    Plain,
    Bfa,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationDoc {
    n: usize,
    protocol: ProtocolDoc,
    tables: Vec<CalibrationEntry>,
}

pub fn calibration_to_json(c: &CalibrationSet) -> String {
    let doc = CalibrationDoc {
        n: c.n(),
        protocol: match c.protocol() {
            ProtocolTag::Plain => ProtocolDoc::Plain,
            ProtocolTag::Bfa => ProtocolDoc::Bfa,
        },
        tables: c
            .tables()
            .iter()
            .map(|(input, t)| {
                let doc = CountsDoc::from_table(t);
                CalibrationEntry { input: format_bits(*input, c.n()), n: doc.n, shots: doc.shots, counts: doc.counts }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("calibration sets always serialise")
}

pub fn calibration_from_json(text: &str) -> Result<CalibrationSet> {
    let doc: CalibrationDoc = serde_json::from_str(text)?;
    let tables = doc
        .tables
        .into_iter()
        .map(|e| {
            let (input, width) = parse_bits(&e.input)?;
            check_n(doc.n, width)?;
            let table = CountsDoc { n: e.n, shots: e.shots, counts: e.counts };
            Ok((input, table.into_table()?))
        })
        .collect::<Result<Vec<_>>>()?;
    let protocol = match doc.protocol {
        ProtocolDoc::Plain => ProtocolTag::Plain,
        ProtocolDoc::Bfa => ProtocolTag::Bfa,
    };
    CalibrationSet::new(doc.n, protocol, tables)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InverseDoc {
    n: usize,
    format: String,
    q_tilde: Vec<f64>,
}

const INVERSE_FORMAT: &str = "syndrome-inverse";

/// `{"n", "format": "syndrome-inverse", "q_tilde"}`; `q_tilde` may hold negative entries.
pub fn inverse_to_json(inv: &InverseCoefficients) -> String {
    let doc = InverseDoc { n: inv.n, format: INVERSE_FORMAT.into(), q_tilde: inv.q_tilde.clone() };
    serde_json::to_string_pretty(&doc).expect("inverse coefficients always serialise")
}

pub fn inverse_from_json(text: &str) -> Result<InverseCoefficients> {
    let doc: InverseDoc = serde_json::from_str(text)?;
    if doc.format != INVERSE_FORMAT {
        return Err(Error::Format(format!("expected format {INVERSE_FORMAT:?}, got {:?}", doc.format)));
    }
    check_n(doc.n, bits_width(doc.q_tilde.len())?)?;
    Ok(InverseCoefficients { n: doc.n, q_tilde: doc.q_tilde })
}

#[derive(Serialize)]
struct MitigationDoc<'a> {
    method: &'a str,
    quasi: &'a [f64],
    physical: &'a [f64],
    residual: f64,
    iterations: usize,
    converged: bool,
}

pub fn mitigation_to_json(r: &MitigationResult) -> String {
    let doc = MitigationDoc {
        method: r.method.as_str(),
        quasi: &r.quasi,
        physical: &r.physical,
        residual: r.residual,
        iterations: r.iterations,
        converged: r.converged,
    };
    serde_json::to_string_pretty(&doc).expect("mitigation results always serialise")
}

/// A JSON array of equal-width bit strings.
pub fn support_from_json(text: &str) -> Result<(usize, Vec<usize>)> {
    let labels: Vec<String> = serde_json::from_str(text)?;
    let mut width = None;
    let mut out = Vec::with_capacity(labels.len());
    for label in &labels {
        let (value, w) = parse_bits(label)?;
        if let Some(first) = width {
            check_n(first, w)?;
        }
        width = Some(w);
        out.push(value);
    }
    let width = width.ok_or_else(|| Error::Format("support list is empty".into()))?;
    Ok((width, out))
}

pub fn support_to_json(n: usize, support: &[usize]) -> String {
    let labels: Vec<String> = support.iter().map(|&x| format_bits(x, n)).collect();
    serde_json::to_string(&labels).expect("labels always serialise")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::symmetrise;
    use crate::example;
    use crate::wht::analytic_inverse;

    #[test]
    fn models_round_trip_bit_exactly() {
        let m = example::response_matrix();
        let models = [
            Model::from(m.clone()),
            Model::from(symmetrise(&m)),
            Model::from(TpnModel::new(vec![(0.013, 0.0571), (0.1 / 3.0, 0.02)]).unwrap()),
            Model::from(TpnModel::symmetric(vec![0.01, 0.2]).unwrap()),
            Model::from(example::grouped_true_model()),
        ];
        for model in models {
            let text = model_to_json(&model);
            let back = model_from_json(&text).unwrap();
            assert_eq!(back, model);
            assert_eq!(model_to_json(&back), text);
        }
    }

    #[test]
    fn model_documents_are_checked() {
        assert!(model_from_json(r#"{"n": 2, "format": "syndrome", "p_tilde": [0.5, 0.5]}"#).is_err());
        assert!(model_from_json(r#"{"n": 1, "format": "syndrome", "p_tilde": [0.5, 0.6]}"#).is_err());
        assert!(model_from_json(r#"{"n": 1, "format": "wavelet", "p_tilde": [1, 0]}"#).is_err());
        assert!(model_from_json(r#"{"n": 1, "format": "tpn", "rates": [[0.1, 0.2]], "symmetric": true}"#).is_err());
        let t = model_from_json(r#"{"n": 1, "format": "tpn", "rates": [[0.1, 0.2]]}"#).unwrap();
        assert_eq!(t, Model::from(TpnModel::new(vec![(0.1, 0.2)]).unwrap()));
        let g = model_from_json(
            r#"{"n": 2, "format": "grouped", "groups": [{"qubits": [1], "p_tilde": [0.9, 0.1]}, {"qubits": [0], "p_tilde": [1, 0]}]}"#,
        )
        .unwrap();
        assert_eq!(g.n(), 2);
    }

    #[test]
    fn counts_round_trip() {
        let t = example::calibration_counts();
        let text = counts_to_json(&t);
        assert!(text.contains("\"0110\": 748"));
        assert_eq!(counts_from_json(&text).unwrap(), t);
        assert!(counts_from_json(r#"{"n": 2, "shots": 3, "counts": {"00": 2}}"#).is_err());
        assert!(counts_from_json(r#"{"n": 2, "shots": 2, "counts": {"000": 2}}"#).is_err());
    }

    #[test]
    fn calibration_round_trip() {
        let bfa = CalibrationSet::new(4, ProtocolTag::Bfa, vec![(0, example::calibration_counts())]).unwrap();
        let text = calibration_to_json(&bfa);
        assert_eq!(calibration_from_json(&text).unwrap(), bfa);
        let plain = CalibrationSet::new(
            1,
            ProtocolTag::Plain,
            vec![
                (0, CountsTable::from_pairs(1, [(0, 9), (1, 1)]).unwrap()),
                (1, CountsTable::from_pairs(1, [(0, 2), (1, 8)]).unwrap()),
            ],
        )
        .unwrap();
        assert_eq!(calibration_from_json(&calibration_to_json(&plain)).unwrap(), plain);
    }

    #[test]
    fn inverse_and_support_round_trip() {
        let inv = analytic_inverse(&symmetrise(&example::response_matrix())).unwrap();
        let back = inverse_from_json(&inverse_to_json(&inv)).unwrap();
        assert_eq!(back, inv);
        let (n, s) = support_from_json(&support_to_json(4, &example::GHZ_SUPPORT)).unwrap();
        assert_eq!((n, s), (4, example::GHZ_SUPPORT.to_vec()));
        assert!(support_from_json(r#"["00", "111"]"#).is_err());
        assert!(support_from_json("[]").is_err());
    }
}
