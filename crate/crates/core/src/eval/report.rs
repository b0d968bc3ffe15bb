use std::fmt::Write;

use crate::error::{Error, Result};

/// One line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub condition: String,
    /// Threshold in metres or the swept value.
    pub value: f64,
    pub inlier_ratio: f64,
    pub n_pairs: usize,
}

/// Rows plus the provenance needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub estimator_id: String,
    /// Hash of the dataset manifest, or a description of the simulated set.
    pub manifest_hash: String,
    pub seed: u64,
    pub config_hash: String,
    /// Column name of `ReportRow::value`.
    pub value_name: String,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            if !(0.0..=1.0).contains(&r.inlier_ratio) || r.n_pairs == 0 {
                return Err(Error::invalid(format!("invalid report row {r:?}")));
            }
        }
        Ok(())
    }

    /// CSV text: `#`-prefixed provenance lines, a header, then rows sorted
    /// by condition and value. Floats use 6 significant digits.
    pub fn to_csv(&self) -> String {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.condition.cmp(&b.condition).then(a.value.total_cmp(&b.value)));
        let mut out = String::new();
        writeln!(out, "# estimator={}", self.estimator_id).unwrap();
        writeln!(out, "# manifest_hash={}", self.manifest_hash).unwrap();
        writeln!(out, "# seed={}", self.seed).unwrap();
        writeln!(out, "# config_hash={}", self.config_hash).unwrap();
        writeln!(out, "condition,{},inlier_ratio,n_pairs", self.value_name).unwrap();
        for r in rows {
            writeln!(
                out,
                "{},{},{},{}",
                r.condition,
                format_g6(r.value),
                format_g6(r.inlier_ratio),
                r.n_pairs
            )
            .unwrap();
        }
        out
    }

    /// Inlier ratio of the first row matching `condition` and `value`.
    pub fn ratio_at(&self, condition: &str, value: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.condition == condition && (r.value - value).abs() < 1e-9)
            .map(|r| r.inlier_ratio)
    }
}

/// Residual histogram as CSV (`bin_left_m,count`).
pub fn histogram_csv(bins: &[(f64, usize)]) -> String {
    let mut out = String::from("bin_left_m,count\n");
    for (left, count) in bins {
        writeln!(out, "{},{count}", format_g6(*left)).unwrap();
    }
    out
}

/// `%g`-style formatting with 6 significant digits.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding may bump the exponent, e.g. 999999.5
    let sci = format!("{:.5e}", x);
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if !(-4..6).contains(&exp) {
        let (mant, _) = sci.split_once('e').unwrap();
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (0.02, "0.02"),
            (0.06, "0.06"),
            (2.0 / 3.0, "0.666667"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (999999.5, "1e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-30.0, "-30"),
            (0.95, "0.95"),
            (0.35000000000000003, "0.35"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g6(x), want, "{x}");
        }
    }

    #[test]
    fn csv_rows_sorted_and_stable() {
        let row = |c: &str, v: f64| ReportRow {
            condition: c.into(),
            value: v,
            inlier_ratio: 0.5,
            n_pairs: 10,
        };
        let r = EvalReport {
            estimator_id: "gccphat".into(),
            manifest_hash: "abc".into(),
            seed: 7,
            config_hash: "def".into(),
            value_name: "threshold_m".into(),
            rows: vec![row("b", 0.1), row("a", 0.2), row("a", 0.1)],
        };
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[4], "condition,threshold_m,inlier_ratio,n_pairs");
        assert_eq!(&lines[5..], ["a,0.1,0.5,10", "a,0.2,0.5,10", "b,0.1,0.5,10"]);
        assert_eq!(csv, r.to_csv());
        r.validate().unwrap();
    }
}
