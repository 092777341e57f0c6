//! Plot-data CSV output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::campaign::BerReport;
use crate::{HarnessError, Result};

pub const HEADER: [&str; 8] = [
    "scenario",
    "eb_n0_db",
    "ber",
    "ci_half_width",
    "lower_bound",
    "bits",
    "errors",
    "cap_hit",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub eb_n0_db: f64,
    pub ber: f64,
    pub ci_half_width: f64,
    pub lower_bound: bool,
    pub bits: u64,
    pub errors: u64,
    pub cap_hit: bool,
}

/// Flattens reports into rows sorted by scenario then Eb/N0.
///
/// Two rows with the same `(scenario, eb_n0_db)` are an error.
pub fn merge_rows(reports: &[BerReport]) -> Result<Vec<Row>> {
    let rows: Vec<Row> = reports
        .iter()
        .flat_map(|r| {
            r.points.iter().map(move |p| Row {
                scenario: r.scenario.name().to_string(),
                eb_n0_db: p.eb_n0_db,
                ber: p.ber,
                ci_half_width: p.ci_half_width,
                lower_bound: p.is_lower_bound(),
                bits: p.bits,
                errors: p.errors,
                cap_hit: p.cap_hit,
            })
        })
        .collect();
    sort_rows(rows)
}

/// Sorts rows by scenario then Eb/N0 and rejects duplicate keys.
pub fn sort_rows(mut rows: Vec<Row>) -> Result<Vec<Row>> {
    rows.sort_by(|a, b| a.scenario.cmp(&b.scenario).then(a.eb_n0_db.total_cmp(&b.eb_n0_db)));
    let dups: Vec<String> = rows
        .windows(2)
        .filter(|w| w[0].scenario == w[1].scenario && w[0].eb_n0_db == w[1].eb_n0_db)
        .map(|w| format!("{}@{}", w[0].scenario, w[0].eb_n0_db))
        .collect();
    if !dups.is_empty() {
        return Err(HarnessError::DuplicateRows(dups.join(", ")));
    }
    Ok(rows)
}

pub fn to_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.eb_n0_db.to_string(),
            r.ber.to_string(),
            r.ci_half_width.to_string(),
            u8::from(r.lower_bound).to_string(),
            r.bits.to_string(),
            r.errors.to_string(),
            u8::from(r.cap_hit).to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// CSV bundle: uncoded and coded comparisons go to separate files.
pub fn report_figures(reports: &[BerReport], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut groups: BTreeMap<&str, Vec<BerReport>> = BTreeMap::new();
    for r in reports {
        let name = if r.scenario.is_coded() { "coded" } else { "uncoded" };
        groups.entry(name).or_default().push(r.clone());
    }
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, group) in groups {
        let path = out_dir.join(format!("ber_{name}.csv"));
        let text = to_csv(&merge_rows(&group)?)?;
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads rows written by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<Row>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| HarnessError::WeightFormat(format!("bad number `{}` in report", field(i))))
        };
        rows.push(Row {
            scenario: field(0).to_string(),
            eb_n0_db: num(1)?,
            ber: num(2)?,
            ci_half_width: num(3)?,
            lower_bound: field(4) == "1",
            bits: num(5)? as u64,
            errors: num(6)? as u64,
            cap_hit: field(7) == "1",
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::{BerPoint, StopRule};
    use crate::Scenario;

    fn report(scenario: Scenario, db: f64, errors: u64) -> BerReport {
        BerReport {
            scenario,
            tau: 0.8,
            beta: 0.5,
            order_bits: 2,
            run_id: "0".into(),
            wall_time_s: 0.0,
            cp_overhead: None,
            points: vec![BerPoint::from_counts(
                db,
                1000,
                errors,
                StopRule {
                    min_errors: 1,
                    max_bits: 1000,
                },
            )],
        }
    }

    #[test]
    fn two_reports_two_sorted_rows() {
        let rows = merge_rows(&[
            report(Scenario::UncodedMap, 6.0, 3),
            report(Scenario::UncodedFde, 8.0, 0),
        ])
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].scenario, "uncoded-fde");
        assert!(rows[0].lower_bound && rows[0].ber == 0.0);
        assert!(!rows[1].lower_bound);
        let text = to_csv(&rows).unwrap();
        assert!(text.starts_with("scenario,eb_n0_db,ber,ci_half_width,lower_bound"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }

    #[test]
    fn duplicates_are_listed() {
        let err = merge_rows(&[
            report(Scenario::UncodedMap, 6.0, 3),
            report(Scenario::UncodedMap, 6.0, 4),
        ])
        .unwrap_err();
        match err {
            HarnessError::DuplicateRows(s) => assert!(s.contains("uncoded-map@6")),
            other => panic!("{other}"),
        }
    }
}
