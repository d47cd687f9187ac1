use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::rate::RateReport;
use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

/// Writes `<stem>.csv`, `<stem>.json` and `<stem>.svg` into `dir`.
pub fn write_report_files(dir: &Path, stem: &str, report: &RateReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    let svg = dir.join(format!("{stem}.svg"));
    std::fs::write(&csv, report.to_csv())?;
    std::fs::write(&json, serde_json::to_string_pretty(&report.summary())? + "\n")?;
    std::fs::write(&svg, svg_chart(report))?;
    Ok(vec![csv, json, svg])
}

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;

/// Log-log chart of the grid errors and the fitted line.
pub fn svg_chart(report: &RateReport) -> String {
    let pts: Vec<(f64, f64)> = report
        .grid
        .iter()
        .filter(|g| g.param > 0.0 && g.error > 0.0)
        .map(|g| (g.param.log10(), g.error.log10()))
        .collect();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="13" text-anchor="middle">{}: error vs {} (slope {:.3})</text>"#,
        W / 2.0,
        escape(&report.observable),
        report.parameter,
        report.slope
    );
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (x0, x1) = bounds(pts.iter().map(|p| p.0));
    let (y0, y1) = bounds(pts.iter().map(|p| p.1));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">log10 {}</text>"#,
        W / 2.0,
        H - 12.0,
        report.parameter
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-family="sans-serif" font-size="11" transform="rotate(-90 14 {})" text-anchor="middle">log10 error</text>"#,
        H / 2.0,
        H / 2.0
    );
    if report.intercept.is_finite() {
        let line = |x: f64| (report.intercept + report.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue" stroke-dasharray="4 3"/>"#,
            sx(x0),
            sy(line(x0)),
            sx(x1),
            sy(line(x1))
        );
    }
    for (g, (x, y)) in report.grid.iter().filter(|g| g.param > 0.0 && g.error > 0.0).zip(&pts) {
        let fill = if g.used { "black" } else { "white" };
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" stroke="black" fill="{fill}"/>"#, sx(*x), sy(*y));
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::rate::GridPoint;

    #[test]
    fn chart_has_one_marker_per_point() {
        let grid = [0.4, 0.2, 0.1]
            .iter()
            .map(|&d| GridPoint {
                param: d,
                error: d,
                error_stderr: 0.0,
                value: 0.0,
                oracle: 0.0,
                ci_halfwidth: 0.0,
                repeats: 1,
                used: true,
            })
            .collect();
        let r = RateReport::fit("cos", "delta", grid, 0.0).unwrap();
        let svg = svg_chart(&r);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(with_threads(Some(0), || 1).is_err());
        assert_eq!(with_threads(Some(2), rayon::current_num_threads).unwrap(), 2);
    }
}
