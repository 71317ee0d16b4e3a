//! Minimal CSV writer with C-style `%.12e` number formatting, so that files
//! are diff-able and bit-stable across platforms.

use std::io::Write;

use crate::error::Result;

/// Formats a float exactly like C's `printf("%.12e", x)`.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    /// Floating-point value, written as `%.12e`.
    Num(f64),
    /// Integer value, written verbatim.
    Int(i64),
    /// Free text (labels, flags); must not contain commas or newlines.
    Text(String),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Num(x) => sci(*x),
            Field::Int(i) => i.to_string(),
            Field::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Num(x)
    }
}

impl From<usize> for Field {
    fn from(x: usize) -> Self {
        Field::Int(x as i64)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}

/// Writes a single header row followed by the data rows.
pub fn write_csv<W: Write>(mut w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<Field>>) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let cells: Vec<String> = row.iter().map(Field::render).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_format() {
        assert_eq!(sci(1.23456), "1.234560000000e+00");
        assert_eq!(sci(-2.5e-7), "-2.500000000000e-07");
        assert_eq!(sci(6.02e123), "6.020000000000e+123");
        assert_eq!(sci(0.0), "0.000000000000e+00");
        assert_eq!(sci(f64::NAN), "nan");
    }

    #[test]
    fn writes_header_and_rows() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["a", "b", "c"], vec![vec![1.0.into(), 3usize.into(), "x".into()]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b,c\n1.000000000000e+00,3,x\n");
    }
}
