//! Minimal SVG plotting, free of external dependencies.
//!
//! Plots are views over the artifacts on disk — `metrics.csv` and the run
//! reports under `runs/` — so every plotted number can be recomputed from
//! those files and a plot can always be re-rendered after the fact.

use crate::experiments::RunReport;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// A fixed-size canvas with a data-space viewport mapped onto it.
#[derive(Debug, Clone)]
pub struct Chart {
    width: f64,
    height: f64,
    margin: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: String,
}

impl Chart {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        Chart {
            width: 640.0,
            height: 420.0,
            margin: 56.0,
            x_range: pad(x_range),
            y_range: pad(y_range),
            body: String::new(),
        }
    }

    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.margin + (x - lo) / (hi - lo) * (self.width - 2.0 * self.margin)
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2.0 * self.margin)
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        if pts.is_empty() {
            return;
        }
        let path: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{} />",
            path.join(" "),
            color,
            dash
        );
    }

    pub fn dot(&mut self, x: f64, y: f64, r: f64, color: &str) {
        let _ = writeln!(
            self.body,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.1}\" fill=\"{}\" />",
            self.px(x),
            self.py(y),
            r,
            color
        );
    }

    pub fn bar(&mut self, x: f64, width: f64, y: f64, color: &str) {
        let x0 = self.px(x - width / 2.0);
        let x1 = self.px(x + width / 2.0);
        let y0 = self.py(y);
        let y1 = self.py(self.y_range.0.max(0.0));
        let _ = writeln!(
            self.body,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" opacity=\"0.85\" />",
            x0,
            y0.min(y1),
            x1 - x0,
            (y1 - y0).abs(),
            color
        );
    }

    pub fn legend(&mut self, entries: &[(&str, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = self.margin + 16.0 * i as f64;
            let x = self.width - self.margin - 150.0;
            let _ = writeln!(
                self.body,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\" />\
                 <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\">{}</text>",
                x,
                y - 9.0,
                color,
                x + 14.0,
                y,
                xml_escape(label)
            );
        }
    }

    /// Render with axes, ticks, and labels.
    pub fn finish(self, title: &str, x_label: &str, y_label: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">",
            self.width, self.height, self.width, self.height
        );
        let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\" />");
        let (x0, x1) = (self.margin, self.width - self.margin);
        let (y0, y1) = (self.height - self.margin, self.margin);
        let _ = writeln!(
            out,
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\" />\
             <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\" />"
        );
        for i in 0..=4 {
            let fx = self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / 4.0;
            let fy = self.y_range.0 + (self.y_range.1 - self.y_range.0) * i as f64 / 4.0;
            let px = self.px(fx);
            let py = self.py(fy);
            let _ = writeln!(
                out,
                "<line x1=\"{px:.1}\" y1=\"{y0}\" x2=\"{px:.1}\" y2=\"{}\" stroke=\"black\" />\
                 <text x=\"{px:.1}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>",
                y0 + 5.0,
                y0 + 18.0,
                tick_label(fx)
            );
            let _ = writeln!(
                out,
                "<line x1=\"{}\" y1=\"{py:.1}\" x2=\"{x0}\" y2=\"{py:.1}\" stroke=\"black\" />\
                 <text x=\"{}\" y=\"{:.1}\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"end\">{}</text>",
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                tick_label(fy)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"24\" font-size=\"14\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>",
            self.width / 2.0,
            xml_escape(title)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>",
            self.width / 2.0,
            self.height - 12.0,
            xml_escape(x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"16\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
            self.height / 2.0,
            self.height / 2.0,
            xml_escape(y_label)
        );
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{:.0e}", v)
    } else if (v - v.round()).abs() < 1e-9 {
        format!("{:.0}", v)
    } else {
        format!("{v:.2}")
    }
}

/// One parsed line of `metrics.csv`.
#[derive(Debug, Clone)]
struct CsvRow {
    technique: String,
    horizon_s: f64,
    energy_budget_j: f64,
    uli_sigma_m: f64,
    coverage_prob: f64,
    iterations: usize,
    status: String,
}

fn read_metrics(path: &Path) -> io::Result<Vec<CsvRow>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 12 {
            continue;
        }
        let parse = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
        rows.push(CsvRow {
            technique: f[0].to_string(),
            horizon_s: parse(f[2]),
            energy_budget_j: parse(f[3]),
            uli_sigma_m: parse(f[4]),
            coverage_prob: parse(f[7]),
            iterations: f[9].parse().unwrap_or(0),
            status: f[11].to_string(),
        });
    }
    Ok(rows)
}

fn read_reports(dir: &Path) -> Vec<(String, RunReport)> {
    let mut out = Vec::new();
    let Ok(entries) = fs::read_dir(dir) else { return out };
    let mut names: Vec<_> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    for path in names {
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(report) = serde_json::from_str::<RunReport>(&text) {
                let name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
                out.push((name.unwrap_or_default(), report));
            }
        }
    }
    out
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn technique_color(idx: usize) -> &'static str {
    PALETTE[idx % PALETTE.len()]
}

fn trajectory_overlay(reports: &[(String, RunReport)]) -> Option<String> {
    let first = reports.first()?;
    let key = |r: &RunReport| {
        (r.seed, r.params.num_slots, r.params.energy_budget_j.to_bits(), r.uli_sigma_m.to_bits())
    };
    let group: Vec<&(String, RunReport)> =
        reports.iter().filter(|(_, r)| key(r) == key(&first.1)).collect();
    let sc = &first.1.scenario;
    let mut chart = Chart::new((0.0, sc.area_size_m), (0.0, sc.area_size_m));
    let mut legend = Vec::new();
    for (i, (_, run)) in group.iter().enumerate() {
        let pts: Vec<(f64, f64)> =
            run.report.final_trajectory.s.iter().map(|p| (p.x, p.y)).collect();
        chart.polyline(&pts, technique_color(i), false);
        legend.push((run.technique.as_str(), technique_color(i)));
    }
    for u in &sc.users {
        chart.dot(u.pos.x, u.pos.y, 4.0, "black");
    }
    chart.dot(sc.base_pos.x, sc.base_pos.y, 5.0, "#e6b800");
    chart.legend(&legend);
    Some(chart.finish("Flight paths over the service area", "x (m)", "y (m)"))
}

fn speed_profile(reports: &[(String, RunReport)]) -> Option<String> {
    let first = reports.first()?;
    let key = |r: &RunReport| {
        (r.seed, r.params.num_slots, r.params.energy_budget_j.to_bits(), r.uli_sigma_m.to_bits())
    };
    let group: Vec<&(String, RunReport)> =
        reports.iter().filter(|(_, r)| key(r) == key(&first.1)).collect();
    let params = &first.1.params;
    let horizon = params.horizon_s();
    let mut chart = Chart::new((0.0, horizon), (0.0, params.v_max * 1.05));
    let mut legend = Vec::new();
    for (i, (_, run)) in group.iter().enumerate() {
        let pts: Vec<(f64, f64)> = run
            .report
            .final_trajectory
            .v
            .iter()
            .enumerate()
            .map(|(k, v)| (k as f64 * params.slot_s, v.norm()))
            .collect();
        chart.polyline(&pts, technique_color(i), false);
        legend.push((run.technique.as_str(), technique_color(i)));
    }
    chart.polyline(&[(0.0, params.v_max), (horizon, params.v_max)], "#999999", true);
    chart.polyline(&[(0.0, params.v_min), (horizon, params.v_min)], "#999999", true);
    chart.legend(&legend);
    Some(chart.finish("Speed profile", "time (s)", "speed (m/s)"))
}

/// Mean coverage against one grid axis, one line per technique.
fn sweep_chart(
    rows: &[CsvRow],
    axis: impl Fn(&CsvRow) -> f64,
    fixed: impl Fn(&CsvRow) -> bool,
    title: &str,
    x_label: &str,
) -> Option<String> {
    let rows: Vec<&CsvRow> =
        rows.iter().filter(|r| fixed(r) && r.coverage_prob.is_finite()).collect();
    let mut techniques: Vec<String> = rows.iter().map(|r| r.technique.clone()).collect();
    techniques.sort();
    techniques.dedup();
    let mut xs: Vec<f64> = rows.iter().map(|r| axis(r)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 || techniques.is_empty() {
        return None;
    }
    let mut chart =
        Chart::new((xs[0], *xs.last().unwrap()), (0.0, 1.0));
    let mut legend = Vec::new();
    for (i, t) in techniques.iter().enumerate() {
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.technique == *t && axis(r) == x)
                    .map(|r| r.coverage_prob)
                    .collect();
                (x, mean(&vals))
            })
            .filter(|p| p.1.is_finite())
            .collect();
        chart.polyline(&pts, technique_color(i), false);
        for &(x, y) in &pts {
            chart.dot(x, y, 3.0, technique_color(i));
        }
        legend.push((t.as_str(), technique_color(i)));
    }
    chart.legend(&legend);
    Some(chart.finish(title, x_label, "coverage probability"))
}

fn iteration_cdf(rows: &[CsvRow]) -> Option<String> {
    let mut techniques: Vec<String> = rows
        .iter()
        .filter(|r| r.iterations > 0)
        .map(|r| r.technique.clone())
        .collect();
    techniques.sort();
    techniques.dedup();
    if techniques.is_empty() {
        return None;
    }
    let max_it = rows.iter().map(|r| r.iterations).max().unwrap_or(1) as f64;
    let mut chart = Chart::new((0.0, max_it), (0.0, 1.0));
    let mut legend = Vec::new();
    for (i, t) in techniques.iter().enumerate() {
        let mut counts: Vec<f64> = rows
            .iter()
            .filter(|r| r.technique == *t && r.iterations > 0)
            .map(|r| r.iterations as f64)
            .collect();
        counts.sort_by(f64::total_cmp);
        let n = counts.len() as f64;
        let mut pts = vec![(0.0, 0.0)];
        for (j, &c) in counts.iter().enumerate() {
            pts.push((c, j as f64 / n));
            pts.push((c, (j + 1) as f64 / n));
        }
        pts.push((max_it, 1.0));
        chart.polyline(&pts, technique_color(i), false);
        legend.push((t.as_str(), technique_color(i)));
    }
    chart.legend(&legend);
    Some(chart.finish("Iterations to termination (CDF)", "iterations", "fraction of runs"))
}

fn robust_bars(rows: &[CsvRow]) -> Option<String> {
    let robust: Vec<&CsvRow> = rows
        .iter()
        .filter(|r| (r.technique == "wc" || r.technique == "medm") && !r.status.starts_with("error"))
        .collect();
    if robust.is_empty() {
        return None;
    }
    let mut groups: Vec<(String, f64)> = Vec::new();
    let mut keys: Vec<(String, u64)> = robust
        .iter()
        .map(|r| (r.technique.clone(), r.uli_sigma_m.to_bits()))
        .collect();
    keys.sort();
    keys.dedup();
    for (t, sig_bits) in keys {
        let vals: Vec<f64> = robust
            .iter()
            .filter(|r| r.technique == t && r.uli_sigma_m.to_bits() == sig_bits)
            .map(|r| r.coverage_prob)
            .collect();
        groups.push((format!("{t} σ={}", f64::from_bits(sig_bits)), mean(&vals)));
    }
    // Nominal reference: the designed-start optimizer without protection.
    let nominal: Vec<f64> = rows
        .iter()
        .filter(|r| r.technique == "ia-dit" && !r.status.starts_with("error"))
        .map(|r| r.coverage_prob)
        .collect();
    if !nominal.is_empty() {
        groups.insert(0, ("unprotected".into(), mean(&nominal)));
    }
    let mut chart = Chart::new((-0.5, groups.len() as f64 - 0.5), (0.0, 1.0));
    let mut legend = Vec::new();
    for (i, (label, v)) in groups.iter().enumerate() {
        chart.bar(i as f64, 0.6, *v, technique_color(i));
        legend.push((label.as_str(), technique_color(i)));
    }
    chart.legend(&legend);
    Some(chart.finish("Guaranteed coverage under location error", "variant", "coverage probability"))
}

/// Re-render every plot from the artifacts under `out_dir`. Missing or
/// sparse data simply skips the affected plot.
pub fn render_all(out_dir: &Path) -> io::Result<()> {
    let plots = out_dir.join("plots");
    fs::create_dir_all(&plots)?;
    let rows = read_metrics(&out_dir.join("metrics.csv")).unwrap_or_default();
    let reports = read_reports(&out_dir.join("runs"));

    let write = |name: &str, svg: Option<String>| -> io::Result<()> {
        if let Some(svg) = svg {
            fs::write(plots.join(name), svg)?;
        }
        Ok(())
    };
    write("trajectory_overlay.svg", trajectory_overlay(&reports))?;
    write("speed_profile.svg", speed_profile(&reports))?;
    let e_max = rows
        .iter()
        .map(|r| r.energy_budget_j)
        .fold(f64::NEG_INFINITY, f64::max);
    let t_max = rows.iter().map(|r| r.horizon_s).fold(f64::NEG_INFINITY, f64::max);
    write(
        "coverage_vs_horizon.svg",
        sweep_chart(
            &rows,
            |r| r.horizon_s,
            |r| r.energy_budget_j == e_max && r.uli_sigma_m == 0.0,
            "Coverage against mission duration",
            "mission duration (s)",
        ),
    )?;
    write(
        "coverage_vs_energy.svg",
        sweep_chart(
            &rows,
            |r| r.energy_budget_j,
            |r| r.horizon_s == t_max && r.uli_sigma_m == 0.0,
            "Coverage against energy budget",
            "energy budget (J)",
        ),
    )?;
    write("iteration_cdf.svg", iteration_cdf(&rows))?;
    write("robust_coverage.svg", robust_bars(&rows))?;
    Ok(())
}
