//! Delimited table output.

use std::io::Write;

use super::CliError;

pub const POPULATION_COLUMNS: [&str; 5] = ["p_p2", "p_p1", "p_0", "p_m1", "p_m2"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Tsv,
}

impl Format {
    fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// `first` column, the five population columns, then `extra`.
    pub fn with_populations(first: &str, extra: &[&str]) -> Self {
        let mut header = vec![first.to_string()];
        header.extend(POPULATION_COLUMNS.iter().map(|s| s.to_string()));
        header.extend(extra.iter().map(|s| s.to_string()));
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write<W: Write>(&self, out: W, format: Format) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().delimiter(format.delimiter()).from_writer(out);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format_sig9(*x))).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Nine significant digits, `%g` style: fixed notation for exponents in
/// [−5, 9), scientific otherwise, trailing zeros removed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Reads a delimited population table: header row, first column the
/// independent variable, then the five population columns.
pub fn read_population_table(text: &str, first: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>), CliError> {
    let delim = if text.lines().next().is_some_and(|l| l.contains('\t')) {
        b'\t'
    } else {
        b','
    };
    let mut r = csv::ReaderBuilder::new().delimiter(delim).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::Input(e.to_string()))?.clone();
    let want: Vec<&str> = std::iter::once(first).chain(POPULATION_COLUMNS).collect();
    let idx: Vec<usize> = want
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| CliError::Input(format!("data file lacks column `{name}`")))
        })
        .collect::<Result<_, _>>()?;
    let mut xs = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(e.to_string()))?;
        let vals: Vec<f64> = idx
            .iter()
            .map(|&i| {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| CliError::Input(format!("data row {}: column {} is not a number", line + 2, i + 1)))
            })
            .collect::<Result<_, _>>()?;
        xs.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    Ok((xs, rows))
}
