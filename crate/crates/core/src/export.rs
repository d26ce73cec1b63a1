//! Plot-ready text output shared by every module that dumps data.
//!
//! Floats are written with 17 significant digits in lowercase scientific
//! notation so that identical runs produce byte-identical files.

use std::io::Write;

use crate::error::Result;

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x == 0.0 {
        // no negative zero in output
        format!("{:.16e}", 0.0)
    } else {
        format!("{x:.16e}")
    }
}

/// Writes a header row followed by one line per row of floats.
pub fn write_csv<W, I>(mut out: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<f64>>,
{
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_float(*v));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_fixed_width_scientific() {
        assert_eq!(format_float(1.7), "1.7000000000000000e0");
        assert_eq!(format_float(-0.3), "-2.9999999999999999e-1");
        assert_eq!(format_float(f64::NAN), "nan");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        // 17 significant digits round-trip exactly
        let x = 0.1 + 0.2;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["n", "g"], vec![vec![0.0, 0.0], vec![1.0, 0.5]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n,g");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "1.0000000000000000e0,5.0000000000000000e-1");
    }
}
