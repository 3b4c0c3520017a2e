//! Control chart rendering as standalone SVG.

use std::fmt::Write;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub n: usize,
    pub statistic: f64,
    pub limit: f64,
    pub alarm: bool,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

/// Reads a trace CSV with header `n,statistic,limit,alarm` (extra columns ignored).
pub fn read_trace<R: std::io::Read>(reader: R) -> Result<Vec<TracePoint>, CliError> {
    let bad = |row: usize, msg: &str| CliError::Validation(format!("trace row {row}: {msg}"));
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Validation(format!("trace header: {e}")))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Validation(format!("trace has no `{name}` column")))
    };
    let (cn, cs, cl, ca) = (col("n")?, col("statistic")?, col("limit")?, col("alarm")?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| bad(row, &e.to_string()))?;
        let field = |c: usize| rec.get(c).ok_or_else(|| bad(row, "missing field"));
        let num = |c: usize| -> Result<f64, CliError> {
            let v: f64 = field(c)?.trim().parse().map_err(|_| bad(row, "not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(row, "non-finite value"))
            }
        };
        out.push(TracePoint {
            n: field(cn)?.trim().parse().map_err(|_| bad(row, "bad step index"))?,
            statistic: num(cs)?,
            limit: num(cl)?,
            alarm: parse_bool(field(ca)?).ok_or_else(|| bad(row, "alarm must be true/false"))?,
        });
    }
    if out.is_empty() {
        return Err(CliError::Validation("trace is empty".into()));
    }
    Ok(out)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Statistic and limit polylines with a circle at every alarm.
pub fn render_svg(trace: &[TracePoint]) -> String {
    let n_min = trace.iter().map(|p| p.n).min().unwrap_or(0) as f64;
    let n_max = trace.iter().map(|p| p.n).max().unwrap_or(1) as f64;
    let values = trace.iter().flat_map(|p| [p.statistic, p.limit]);
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let span_n = (n_max - n_min).max(1.0);
    let x = |n: usize| MARGIN + (n as f64 - n_min) / span_n * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);
    let line = |f: &dyn Fn(&TracePoint) -> f64| {
        trace
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.n), y(f(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, yb, yt) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{x0},{yt} L{x0},{yb} L{x1},{yb}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">step</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(s, r#"<text x="{x0}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#, yb + 15.0, n_min);
    let _ = writeln!(s, r#"<text x="{x1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#, yb + 15.0, n_max);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{yb}" font-size="11" text-anchor="end">{lo:.3}</text>"#, x0 - 4.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{yt}" font-size="11" text-anchor="end">{hi:.3}</text>"#, x0 - 4.0);
    let _ = writeln!(
        s,
        r#"<polyline class="limit" points="{}" fill="none" stroke="red" stroke-dasharray="5,3"/>"#,
        line(&|p| p.limit)
    );
    let _ = writeln!(
        s,
        r#"<polyline class="statistic" points="{}" fill="none" stroke="steelblue"/>"#,
        line(&|p| p.statistic)
    );
    for p in trace.iter().filter(|p| p.alarm) {
        let _ = writeln!(
            s,
            r#"<circle class="alarm" cx="{:.2}" cy="{:.2}" r="4" fill="red"/>"#,
            x(p.n),
            y(p.statistic)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: usize, alarms: &[usize]) -> Vec<TracePoint> {
        (1..=n)
            .map(|i| TracePoint {
                n: i,
                statistic: (i as f64).sin(),
                limit: 0.8,
                alarm: alarms.contains(&i),
            })
            .collect()
    }

    #[test]
    fn structure() {
        let svg = render_svg(&trace(100, &[]));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn one_marker_per_alarm() {
        let svg = render_svg(&trace(30, &[2, 8, 14, 21]));
        assert_eq!(svg.matches(r#"class="alarm""#).count(), 4);
    }

    #[test]
    fn single_point_and_flat_trace() {
        let t = vec![TracePoint { n: 1, statistic: 1.0, limit: 1.0, alarm: false }];
        assert!(!render_svg(&t).contains("NaN"));
    }

    #[test]
    fn read_errors() {
        assert!(read_trace("n,statistic,limit,alarm\n".as_bytes()).is_err());
        assert!(read_trace("n,statistic,limit,alarm\n1,x,1,false\n".as_bytes()).is_err());
        assert!(read_trace("n,statistic,alarm\n1,0.5,false\n".as_bytes()).is_err());
        let ok = read_trace("n,statistic,limit,alarm\n1,0.5,1,false\n2,1.5,1,true\n".as_bytes()).unwrap();
        assert_eq!(ok.len(), 2);
        assert!(ok[1].alarm);
    }
}
