//! Result rendering: CSV tables and a JSON envelope, both fully determined
//! by their inputs so identical runs produce byte-identical files.

use serde::Serialize;

use crate::error::{Error, Result};

use super::ber::BerPoint;
use super::config::ExperimentConfig;
use super::llr::LlrHistogram;
use super::validate::{CovarianceReport, ProbeValidationReport};

/// Output formats the command-line tool can write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!(
                "unknown format {other:?}; expected \"csv\" or \"json\""
            ))),
        }
    }
}

/// Renders a bit-error-rate sweep as CSV, one row per grid point.
pub fn ber_csv(points: &[BerPoint]) -> String {
    let mut out = String::from("loss_db,avg_time_corr_units,trials,errors,ber,ci95_low,ci95_high\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.loss_db, p.avg_time_corr_units, p.trials, p.errors, p.ber, p.ci95_low, p.ci95_high
        ));
    }
    out
}

/// Renders statistic histograms as CSV, one row per bin.
pub fn llr_csv(histograms: &[LlrHistogram]) -> String {
    let mut out = String::from(
        "loss_db,avg_time_corr_units,correlated,bin_low,bin_high,count_c0,count_c1,overlap\n",
    );
    for h in histograms {
        for (i, (&c0, &c1)) in h.counts_c0.iter().zip(&h.counts_c1).enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                h.loss_db,
                h.avg_time_corr_units,
                h.correlated,
                h.bin_edges[i],
                h.bin_edges[i + 1],
                c0,
                c1,
                h.overlap
            ));
        }
    }
    out
}

/// Renders a probe validation report as CSV, one row per check.
pub fn validation_csv(report: &ProbeValidationReport) -> String {
    let mut out = String::from("name,pass,value,detail\n");
    for c in &report.checks {
        let detail = c.detail.replace(',', ";").replace('\n', " ");
        out.push_str(&format!("{},{},{},{}\n", c.name, c.pass, c.value, detail));
    }
    out
}

/// Renders a covariance check as CSV, one row per loss and hypothesis.
pub fn covariance_csv(report: &CovarianceReport) -> String {
    let mut out = String::from(
        "loss_db,hypothesis,measured_c_pp,measured_c_pm,measured_c_mm,\
         expected_c_pp,expected_c_pm,expected_c_mm,max_relative_deviation,pass\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.loss_db,
            r.hypothesis,
            r.measured.c_pp,
            r.measured.c_pm,
            r.measured.c_mm,
            r.expected.c_pp,
            r.expected.c_pm,
            r.expected.c_mm,
            r.max_relative_deviation,
            r.pass
        ));
    }
    out
}

/// Envelope written by every JSON report.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'static str,
    kind: &'a str,
    config: &'a ExperimentConfig,
    rows: &'a T,
}

/// Renders any result set as a pretty-printed JSON document carrying the
/// tool version and the exact configuration that produced it.
pub fn json_report<T: Serialize>(
    kind: &str,
    config: &ExperimentConfig,
    rows: &T,
) -> Result<String> {
    let envelope = Envelope {
        version: env!("CARGO_PKG_VERSION"),
        kind,
        config,
        rows,
    };
    let mut text = serde_json::to_string_pretty(&envelope)
        .map_err(|err| Error::Config(format!("cannot serialise report: {err}")))?;
    text.push('\n');
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ber_csv_has_the_documented_header_and_shape() {
        let points = vec![
            BerPoint::from_counts(0.1, 20, 1000, 37),
            BerPoint::from_counts(1.0, 50, 1000, 0),
        ];
        let csv = ber_csv(&points);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "loss_db,avg_time_corr_units,trials,errors,ber,ci95_low,ci95_high"
        );
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.1,20,1000,37,0.037,"));
        assert!(lines[2].starts_with("1,50,1000,0,0,"));
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn llr_csv_emits_one_row_per_bin() {
        let h = LlrHistogram {
            loss_db: 0.1,
            avg_time_corr_units: 5,
            correlated: true,
            samples_per_hypothesis: 3,
            bin_edges: vec![-1.0, 0.0, 1.0],
            counts_c0: vec![2, 1],
            counts_c1: vec![0, 3],
            overlap: 0.25,
        };
        let csv = llr_csv(&[h]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "0.1,5,true,-1,0,2,0,0.25");
        assert_eq!(lines[2], "0.1,5,true,0,1,1,3,0.25");
    }

    #[test]
    fn validation_csv_escapes_commas_in_details() {
        let report = ProbeValidationReport {
            checks: vec![crate::harness::validate::CheckResult {
                name: "example".to_string(),
                pass: true,
                value: 1.5,
                detail: "a, b\nc".to_string(),
            }],
            passed: true,
        };
        let csv = validation_csv(&report);
        assert_eq!(csv.lines().nth(1).unwrap(), "example,true,1.5,a; b c");
    }

    #[test]
    fn json_report_carries_version_kind_and_config() {
        let config = ExperimentConfig::default();
        let points = vec![BerPoint::from_counts(0.1, 1, 10, 5)];
        let text = json_report("ber", &config, &points).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["kind"], "ber");
        assert_eq!(value["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(value["config"]["r_low"], 1000.0);
        assert_eq!(value["rows"][0]["errors"], 5);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn format_parses_known_names_only() {
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
        assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
        assert!("yaml".parse::<Format>().is_err());
    }
}
