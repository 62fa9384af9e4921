//! Wire formats: assignment JSON, profile and experiment CSV, and the JSON
//! shapes of bound, certificate and search results.

use std::io::Write;

use serde::Serialize;

use crate::assignment::{validate, AssignmentDoc, MessageAssignment};
use crate::certificate::{CertificateSet, TraceStep};
use crate::error::{Error, Result};
use crate::expansion::ExpansionProfile;
use crate::search::{AlphaRatio, ExpansionExperiment};

fn byte_offset(input: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = input
        .split(|&b| b == b'\n')
        .take(line - 1)
        .map(|l| l.len() + 1)
        .sum();
    (start + column.saturating_sub(1)).min(input.len())
}

/// Parses an assignment document without validating it.
pub fn parse_document(input: &[u8]) -> Result<AssignmentDoc> {
    serde_json::from_slice(input).map_err(|e| Error::Parse {
        offset: byte_offset(input, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Parses an assignment document, normalises set order and validates it.
pub fn parse_assignment(input: &[u8]) -> Result<MessageAssignment> {
    let doc = parse_document(input)?;
    let report = validate(&doc);
    if !report.valid {
        return Err(Error::Invalid(report));
    }
    doc.try_into()
}

pub fn assignment_json(a: &MessageAssignment) -> String {
    serde_json::to_string(a).expect("assignment serialises")
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialises")
}

#[derive(Serialize)]
struct CertificateDoc<'a> {
    kind: crate::certificate::CertificateKind,
    set_s: &'a [usize],
    carried: usize,
    implied_bound: usize,
    trace: &'a [TraceStep],
}

pub fn certificate_json(c: &CertificateSet) -> String {
    to_json_pretty(&CertificateDoc {
        kind: c.kind,
        set_s: &c.set_s,
        carried: c.carried,
        implied_bound: c.implied_bound,
        trace: &c.trace.steps,
    })
}

/// `i,e_i,candidate` rows for `i = 0..=K`.
pub fn write_profile_csv<W: Write>(profile: &ExpansionProfile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["i", "e_i", "candidate"]).map_err(io)?;
    for i in 0..=profile.k {
        w.write_record([
            i.to_string(),
            profile.e[i].to_string(),
            profile.candidate(i).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// `trial,success,min_ratio` rows, one per trial.
pub fn write_experiment_csv<W: Write>(exp: &ExpansionExperiment, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["trial", "success", "min_ratio"])
        .map_err(io)?;
    for o in &exp.outcomes {
        let ratio = *o.min_ratio.numer() as f64 / *o.min_ratio.denom() as f64;
        w.write_record([
            o.trial.to_string(),
            o.success.to_string(),
            ratio.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ratio_csv<W: Write>(ratios: &[AlphaRatio], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["alpha", "size", "e_size", "ratio"])
        .map_err(io)?;
    for r in ratios {
        w.write_record([
            r.alpha.to_string(),
            r.size.to_string(),
            r.neighbours.to_string(),
            r.ratio.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::Rule;
    use crate::certificate::construct_certificate;
    use crate::expansion::{dof_upper_bound, exact_profile};

    #[test]
    fn parses_identity() {
        let a = parse_assignment(br#"{"k":3,"m":1,"transmit_sets":[[1],[2],[3]]}"#).unwrap();
        assert_eq!(a.transmit_sets(), &[vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn sorts_sets() {
        let a = parse_assignment(br#"{"k":3,"m":2,"transmit_sets":[[1,2],[2,3],[3,1]]}"#).unwrap();
        assert_eq!(a.transmit_sets(), &[vec![1, 2], vec![2, 3], vec![1, 3]]);
        assert_eq!(
            assignment_json(&a),
            r#"{"k":3,"m":2,"transmit_sets":[[1,2],[2,3],[1,3]]}"#
        );
    }

    #[test]
    fn reports_validation_failure() {
        match parse_assignment(br#"{"k":3,"m":1,"transmit_sets":[[1,2],[2],[3]]}"#) {
            Err(Error::Invalid(report)) => {
                assert_eq!(report.violations[0].rule, Rule::Oversize);
                assert_eq!(report.violations[0].index, Some(1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_offset() {
        let input = b"{\"k\":3,\n \"m\": x}";
        match parse_assignment(input) {
            Err(Error::Parse { offset, .. }) => assert_eq!(input[offset], b'x'),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn profile_csv_layout() {
        let a = parse_assignment(br#"{"k":3,"m":2,"transmit_sets":[[1,2],[2,3],[3,1]]}"#).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&exact_profile(&a).unwrap(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "i,e_i,candidate\n0,0,3\n1,2,2\n2,3,3\n3,3,3\n"
        );
    }

    #[test]
    fn bound_and_certificate_json_shapes() {
        let a = parse_assignment(br#"{"k":5,"m":2,"transmit_sets":[[1],[1,2],[2,3],[3,4],[4,5]]}"#)
            .unwrap();
        let b: serde_json::Value =
            serde_json::from_str(&to_json_pretty(&dof_upper_bound(&a).unwrap())).unwrap();
        assert_eq!(b["value"], 3);
        assert_eq!(b["mode"], "exact");
        assert!(b["witness"].is_array());
        let c: serde_json::Value =
            serde_json::from_str(&certificate_json(&construct_certificate(&a).unwrap())).unwrap();
        assert_eq!(c["kind"], "theorem2");
        assert_eq!(c["set_s"], serde_json::json!([1, 2]));
        assert_eq!(c["trace"][1]["carried_after"], 3);
    }
}
