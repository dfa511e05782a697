//! CSV and JSON output. Every number is written with 17 significant
//! digits (C's `%.17g`), which round-trips binary64 exactly.

use std::io::{self, Write};

use serde::Serialize;

use crate::flow::Trajectory;
use crate::geodesic::GeodesicSegment;

/// Formats `x` like C's `printf("%.17g", x)`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn coord_header(n: usize) -> String {
    (1..=n).map(|i| format!(",coord_{i}")).collect()
}

/// Columns `t,coord_1..coord_n`.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    let n = traj.points.first().map_or(0, |p| p.dim());
    writeln!(w, "t{}", coord_header(n))?;
    for (t, p) in traj.times.iter().zip(&traj.points) {
        write!(w, "{}", fmt_g17(*t))?;
        for c in p.as_slice() {
            write!(w, ",{}", fmt_g17(*c))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Columns `t,length`.
pub fn write_lengths_csv<W: Write>(mut w: W, lengths: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "t,length")?;
    for (t, l) in lengths {
        writeln!(w, "{},{}", fmt_g17(*t), fmt_g17(*l))?;
    }
    Ok(())
}

/// Columns `index,coord_1..coord_n`.
pub fn write_segment_csv<W: Write>(mut w: W, seg: &GeodesicSegment) -> io::Result<()> {
    let n = seg.points.first().map_or(0, |p| p.dim());
    writeln!(w, "index{}", coord_header(n))?;
    for (i, p) in seg.points.iter().enumerate() {
        write!(w, "{i}")?;
        for c in p.as_slice() {
            write!(w, ",{}", fmt_g17(*c))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// serde_json formatter writing floats as `%.17g`.
struct G17Formatter;

impl serde_json::ser::Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as JSON with `%.17g` floats. Non-finite floats
/// become `null`.
pub fn to_json_g17<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, G17Formatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("JSON is UTF-8"))
}
