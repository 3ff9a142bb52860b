//! Strategy comparison reports built from a campaign's output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::campaign::{read_admitted_log, StatKey, StatsTable};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{0}: stats.csv is missing")]
    MissingStats(PathBuf),
    #[error("{path}: {msg}")]
    Corrupt { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// One point of a per-strategy curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub cycle: u64,
    pub generated: u64,
    pub interesting: u64,
}

impl CurvePoint {
    pub fn ratio(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.interesting as f64 / self.generated as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DictionaryTotals {
    pub entries: u64,
    pub enhanced: u64,
    pub naive: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    /// Cumulative counters per strategy, one point per cycle.
    pub curves: BTreeMap<StatKey, Vec<CurvePoint>>,
    /// Cumulative admissions per strategy against total executions.
    pub admitted: BTreeMap<StatKey, Vec<(u64, u64)>>,
    pub dictionary: DictionaryTotals,
    /// Summed parse, mutate and execute milliseconds per strategy.
    pub phases: BTreeMap<StatKey, [f64; 3]>,
}

/// Cumulative curves from a stats table. Every strategy gets a point for
/// every cycle that appears anywhere in the table.
pub fn cumulative_curves(stats: &StatsTable) -> BTreeMap<StatKey, Vec<CurvePoint>> {
    let mut cycles: Vec<u64> = stats.rows().map(|(c, _, _)| c).collect();
    cycles.sort_unstable();
    cycles.dedup();
    let mut per: BTreeMap<StatKey, BTreeMap<u64, (u64, u64)>> = BTreeMap::new();
    for (c, k, r) in stats.rows() {
        per.entry(k).or_default().insert(c, (r.generated, r.interesting));
    }
    per.into_iter()
        .map(|(k, rows)| {
            let (mut g, mut i) = (0, 0);
            let pts = cycles
                .iter()
                .map(|&c| {
                    if let Some(&(dg, di)) = rows.get(&c) {
                        g += dg;
                        i += di;
                    }
                    CurvePoint { cycle: c, generated: g, interesting: i }
                })
                .collect();
            (k, pts)
        })
        .collect()
}

fn corrupt(path: &Path, msg: impl ToString) -> ReportError {
    ReportError::Corrupt { path: path.to_path_buf(), msg: msg.to_string() }
}

fn read_dictionary_log(path: &Path) -> Result<DictionaryTotals, ReportError> {
    let mut t = DictionaryTotals::default();
    if !path.exists() {
        return Ok(t);
    }
    let mut rd = csv::Reader::from_path(path).map_err(|e| corrupt(path, e))?;
    let headers = rd.headers().map_err(|e| corrupt(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| corrupt(path, format!("no {name} column")));
    let (ce, cn) = (col("enhanced")?, col("naive")?);
    for rec in rd.records() {
        let rec = rec.map_err(|e| corrupt(path, e))?;
        let num = |i: usize| rec.get(i).and_then(|v| v.parse::<u64>().ok()).ok_or_else(|| corrupt(path, "bad number"));
        t.entries += 1;
        t.enhanced += num(ce)?;
        t.naive += num(cn)?;
    }
    Ok(t)
}

/// Load everything the report needs from a campaign output directory.
pub fn build_report(out_dir: &Path) -> Result<Report, ReportError> {
    let stats_path = out_dir.join("stats.csv");
    if !stats_path.is_file() {
        return Err(ReportError::MissingStats(out_dir.to_path_buf()));
    }
    let f = fs::File::open(&stats_path).map_err(|source| ReportError::Io { path: stats_path.clone(), source })?;
    let stats = StatsTable::read_csv(f).map_err(|e| corrupt(&stats_path, e))?;
    let mut report = Report { curves: cumulative_curves(&stats), ..Report::default() };
    for (k, r) in stats.totals() {
        let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
        report.phases.insert(k, [ms(r.parse), ms(r.mutate), ms(r.exec)]);
    }
    let log = out_dir.join("admitted.log");
    if log.is_file() {
        let recs = read_admitted_log(&log).map_err(|e| corrupt(&log, e))?;
        let mut counts: BTreeMap<StatKey, u64> = BTreeMap::new();
        for r in recs {
            let k = StatKey::Strategy(r.strategy);
            let n = counts.entry(k).or_default();
            *n += 1;
            report.admitted.entry(k).or_default().push((r.exec, *n));
        }
    }
    report.dictionary = read_dictionary_log(&out_dir.join("dictionary.csv"))?;
    Ok(report)
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// A minimal line chart. Each series is a list of (x, y) points.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, l, r, t, b) = (760.0, 420.0, 70.0, 170.0, 40.0, 50.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y1) = (f64::MAX, f64::MIN, 0.0f64);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    let px = |x: f64| l + (x - x0) / (x1 - x0) * (w - l - r);
    let py = |y: f64| h - b - y / y1 * (h - t - b);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, (l + w - r) / 2.0, esc(title));
    let _ = writeln!(s, r#"<line x1="{l}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - b, w - r, h - b);
    let _ = writeln!(s, r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{}" stroke="black"/>"#, h - b);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), f * y1);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(xv), h - b + 16.0, tick(xv));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + w - r) / 2.0, h - 10.0, esc(x_label));
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, (t + h - b) / 2.0, (t + h - b) / 2.0, esc(y_label));
    for (i, (name, p)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let ly = t + 14.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, w - r + 10.0, w - r + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - r + 35.0, ly + 4.0, esc(name));
    }
    s.push_str("</svg>\n");
    s
}

/// A minimal horizontal bar chart.
pub fn bar_chart_svg(title: &str, bars: &[(String, f64)]) -> String {
    let (w, l, row) = (640.0, 150.0, 22.0);
    let h = 50.0 + row * bars.len() as f64;
    let max = bars.iter().map(|b| b.1).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, esc(title));
    for (i, (name, v)) in bars.iter().enumerate() {
        let y = 36.0 + row * i as f64;
        let bw = v / max * (w - l - 90.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, l - 6.0, y + 13.0, esc(name));
        let _ = writeln!(s, r##"<rect x="{l}" y="{y}" width="{bw:.1}" height="{}" fill="#1f77b4"/>"##, row - 6.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}">{}</text>"#, l + bw + 4.0, y + 13.0, tick(*v));
    }
    s.push_str("</svg>\n");
    s
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64) -> String {
    if (v.fract() == 0.0 && v.abs() < 1e12) || v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// Files written by [`write_report`].
#[derive(Debug, Clone, Default)]
pub struct Written {
    pub csv: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}

/// Write the report's CSV tables, and SVG plots for whatever has data.
pub fn write_report(report: &Report, dir: &Path) -> Result<Written, ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
    let mut out = Written::default();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e: csv::Error| ReportError::Io { path, source: e.into() }
    };

    let p = dir.join("cumulative.csv");
    let mut w = csv::Writer::from_path(&p).map_err(io(&p))?;
    w.write_record(["cycle", "strategy", "generated", "interesting", "ratio"]).map_err(io(&p))?;
    for (k, pts) in &report.curves {
        for pt in pts {
            w.write_record([pt.cycle.to_string(), k.to_string(), pt.generated.to_string(), pt.interesting.to_string(), format!("{:.6}", pt.ratio())])
                .map_err(io(&p))?;
        }
    }
    w.flush().map_err(|source| ReportError::Io { path: p.clone(), source })?;
    out.csv.push(p);

    let p = dir.join("admitted_curve.csv");
    let mut w = csv::Writer::from_path(&p).map_err(io(&p))?;
    w.write_record(["exec", "strategy", "cumulative"]).map_err(io(&p))?;
    for (k, pts) in &report.admitted {
        for (e, n) in pts {
            w.write_record([e.to_string(), k.to_string(), n.to_string()]).map_err(io(&p))?;
        }
    }
    w.flush().map_err(|source| ReportError::Io { path: p.clone(), source })?;
    out.csv.push(p);

    let p = dir.join("dictionary_summary.csv");
    let mut w = csv::Writer::from_path(&p).map_err(io(&p))?;
    w.write_record(["mode", "mutants"]).map_err(io(&p))?;
    if report.dictionary.entries > 0 {
        w.write_record(["enhanced", &report.dictionary.enhanced.to_string()]).map_err(io(&p))?;
        w.write_record(["naive", &report.dictionary.naive.to_string()]).map_err(io(&p))?;
    }
    w.flush().map_err(|source| ReportError::Io { path: p.clone(), source })?;
    out.csv.push(p);

    let p = dir.join("phases.csv");
    let mut w = csv::Writer::from_path(&p).map_err(io(&p))?;
    w.write_record(["strategy", "parse_ms", "mutate_ms", "exec_ms"]).map_err(io(&p))?;
    for (k, [a, b, c]) in &report.phases {
        w.write_record([k.to_string(), format!("{a:.3}"), format!("{b:.3}"), format!("{c:.3}")]).map_err(io(&p))?;
    }
    w.flush().map_err(|source| ReportError::Io { path: p.clone(), source })?;
    out.csv.push(p);

    let mut svg = |name: &str, text: String| -> Result<(), ReportError> {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|source| ReportError::Io { path: p.clone(), source })?;
        out.svg.push(p);
        Ok(())
    };
    let has_data = report.curves.values().flatten().any(|p| p.generated > 0);
    if has_data {
        let series = |f: &dyn Fn(&CurvePoint) -> f64| -> Vec<(String, Vec<(f64, f64)>)> {
            report.curves.iter().map(|(k, pts)| (k.to_string(), pts.iter().map(|p| (p.cycle as f64, f(p))).collect())).collect()
        };
        svg("cumulative.svg", line_chart_svg("Interesting inputs per strategy", "cycle", "cumulative interesting", &series(&|p| p.interesting as f64)))?;
        svg("ratio.svg", line_chart_svg("Interesting / generated", "cycle", "ratio", &series(&|p| p.ratio())))?;
    }
    if !report.admitted.is_empty() {
        let series: Vec<_> = report
            .admitted
            .iter()
            .map(|(k, pts)| (k.to_string(), pts.iter().map(|&(e, n)| (e as f64, n as f64)).collect()))
            .collect();
        svg("admitted.svg", line_chart_svg("Admitted entries per strategy", "executions", "cumulative admitted", &series))?;
    }
    if report.dictionary.entries > 0 {
        let bars = vec![("enhanced".to_string(), report.dictionary.enhanced as f64), ("naive".to_string(), report.dictionary.naive as f64)];
        svg("dictionary.svg", bar_chart_svg("Dictionary mutants", &bars))?;
    }
    let timed: Vec<(String, f64)> = report.phases.iter().map(|(k, v)| (k.to_string(), v.iter().sum())).filter(|(_, v)| *v > 0.0).collect();
    if !timed.is_empty() {
        svg("phases.svg", bar_chart_svg("Time per strategy (ms)", &timed))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutate::Strategy;

    #[test]
    fn curves_are_cumulative_and_aligned() {
        let mut t = StatsTable::default();
        t.row_mut(1, Strategy::Tree).generated = 10;
        t.row_mut(1, Strategy::Tree).interesting = 2;
        t.row_mut(3, Strategy::Tree).generated = 5;
        t.row_mut(3, Strategy::Tree).interesting = 1;
        t.row_mut(2, Strategy::Havoc).generated = 4;
        let c = cumulative_curves(&t);
        let tree: Vec<(u64, u64)> = c[&StatKey::from(Strategy::Tree)].iter().map(|p| (p.cycle, p.interesting)).collect();
        assert_eq!(tree, [(1, 2), (2, 2), (3, 3)]);
        assert_eq!(c[&StatKey::from(Strategy::Havoc)][0].ratio(), 0.0);
    }

    #[test]
    fn empty_stats_give_csvs_and_no_plots() {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("stats.csv"), "cycle,strategy,generated,interesting,applications,parse_ms,mutate_ms,exec_ms\n").unwrap();
        let r = build_report(d.path()).unwrap();
        let w = write_report(&r, &d.path().join("report")).unwrap();
        assert_eq!(w.csv.len(), 4);
        assert!(w.svg.is_empty());
        assert!(matches!(build_report(&d.path().join("nope")), Err(ReportError::MissingStats(_))));
        fs::write(d.path().join("stats.csv"), "garbage\n1,2\n").unwrap();
        assert!(matches!(build_report(d.path()), Err(ReportError::Corrupt { .. })));
    }
}
