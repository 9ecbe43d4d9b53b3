//! Minimal CSV writing and reading for the numeric tables.

use super::config::ConfigError;

/// Formats like C's `%.12g`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const P: i32 = 12;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..P).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Reads the `r_1..r_M` columns of a thresholds table, one vector per row.
pub fn read_thresholds_csv(text: &str, m: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    let err = |line: usize, message: String| ConfigError {
        line: Some(line),
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| ConfigError {
        line: None,
        message: "thresholds file is empty".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut idx = Vec::with_capacity(m);
    for i in 1..=m {
        let name = format!("r_{i}");
        let k = cols
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| err(1, format!("missing column {name}")))?;
        idx.push(k);
    }
    if cols.iter().any(|c| c.strip_prefix("r_").is_some_and(|n| n.parse::<usize>().is_ok_and(|n| n > m))) {
        return Err(err(1, format!("thresholds file has more than {m} user columns")));
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(err(n + 1, format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let row = idx
            .iter()
            .map(|&k| {
                fields[k]
                    .parse::<f64>()
                    .map_err(|_| err(n + 1, format!("not a number: {:?}", fields[k])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g12() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (3.837426123456789, "3.83742612346"),
            (1e-5, "1e-05"),
            (1.5e-7, "1.5e-07"),
            (123456789012345.0, "1.23456789012e+14"),
            (-2.25, "-2.25"),
            (0.0001, "0.0001"),
            (100.0, "100"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_num(x), want, "{x}");
        }
    }

    #[test]
    fn thresholds_roundtrip() {
        let mut t = CsvTable::new(vec!["snr_db".into(), "r_1".into(), "r_2".into(), "phi_analytic".into()]);
        t.push(vec!["0".into(), "1.25".into(), "0.5".into(), "1".into()]);
        t.push(vec!["".into(), "2".into(), "3".into(), "1".into()]);
        let rows = read_thresholds_csv(&t.render(), 2).unwrap();
        assert_eq!(rows, vec![vec![1.25, 0.5], vec![2.0, 3.0]]);
        assert!(read_thresholds_csv(&t.render(), 3).is_err());
        assert!(read_thresholds_csv(&t.render(), 1).is_err());
    }

    #[test]
    fn bad_number_reports_line() {
        let e = read_thresholds_csv("r_1\n1.0\nabc\n", 1).unwrap_err();
        assert_eq!(e.line, Some(3));
    }
}
