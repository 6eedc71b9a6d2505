//! Reading and writing sample vectors and estimates.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One `re,im` pair per line; blank lines and lines starting with `#` are skipped.
pub fn read_samples_csv<R: BufRead>(input: R) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Input(format!("line {}: expected 're,im', got '{line}'", i + 1));
        let (re, im) = line.split_once(',').ok_or_else(bad)?;
        let re: f64 = re.trim().parse().map_err(|_| bad())?;
        let im: f64 = im.trim().parse().map_err(|_| bad())?;
        if !re.is_finite() || !im.is_finite() {
            return Err(bad());
        }
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

/// Interleaved little-endian `f64` pairs.
pub fn read_samples_bin<R: Read>(mut input: R) -> Result<Vec<Complex64>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Input(format!("{} bytes is not a whole number of complex samples", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect())
}

pub fn write_samples_csv<W: Write>(x: &[Complex64], mut out: W) -> Result<()> {
    for z in x {
        writeln!(out, "{:.16e},{:.16e}", z.re, z.im)?;
    }
    Ok(())
}

pub fn write_samples_bin<W: Write>(x: &[Complex64], mut out: W) -> Result<()> {
    let mut buf = Vec::with_capacity(16 * x.len());
    for z in x {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// `frequency,value` rows with 17 significant digits, after a header line.
pub fn write_spectrum_csv<W: Write>(frequencies: &[f64], values: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "frequency,value")?;
    for (f, v) in frequencies.iter().zip(values) {
        writeln!(out, "{f:.16e},{v:.16e}")?;
    }
    Ok(())
}

pub fn read_spectrum_csv<R: BufRead>(input: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut freqs = Vec::new();
    let mut values = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 && line.starts_with("frequency") || line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Input(format!("line {}: expected 'frequency,value'", i + 1));
        let (f, v) = line.split_once(',').ok_or_else(bad)?;
        freqs.push(f.trim().parse().map_err(|_| bad())?);
        values.push(v.trim().parse().map_err(|_| bad())?);
    }
    Ok((freqs, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<Complex64> {
        vec![
            Complex64::new(0.1, -0.2),
            Complex64::new(1.0 / 3.0, std::f64::consts::PI),
            Complex64::new(-1e-300, 6.02e23),
        ]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let x = samples();
        let mut buf = Vec::new();
        write_samples_csv(&x, &mut buf).unwrap();
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), x);
    }

    #[test]
    fn bin_round_trip_is_exact() {
        let x = samples();
        let mut buf = Vec::new();
        write_samples_bin(&x, &mut buf).unwrap();
        assert_eq!(buf.len(), 48);
        assert_eq!(read_samples_bin(buf.as_slice()).unwrap(), x);
        assert!(read_samples_bin(&buf[..47]).is_err());
    }

    #[test]
    fn csv_tolerates_comments_and_rejects_garbage() {
        let text = "# header\n1,2\n\n 3 , 4 \n";
        assert_eq!(read_samples_csv(text.as_bytes()).unwrap(), vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)]);
        assert!(read_samples_csv("1;2\n".as_bytes()).is_err());
        assert!(read_samples_csv("1,x\n".as_bytes()).is_err());
        assert!(read_samples_csv("nan,0\n".as_bytes()).is_err());
    }

    #[test]
    fn spectrum_round_trip_is_exact() {
        let f = vec![0.0, 0.25, 0.5, 0.75];
        let v = vec![1.0 / 7.0, 2e-17, 123456.789, 0.0];
        let mut buf = Vec::new();
        write_spectrum_csv(&f, &v, &mut buf).unwrap();
        let (f2, v2) = read_spectrum_csv(buf.as_slice()).unwrap();
        assert_eq!((f2, v2), (f, v));
    }
}
