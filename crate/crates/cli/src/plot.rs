//! Plain SVG charts of benchmark rows: success rates, stacked mean times
//! and path-length box plots.

use std::collections::BTreeSet;
use std::fmt::Write;

use dmp_avoid_core::planner::bench::{BenchRow, BenchSummary};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

struct Chart {
    body: String,
    y_max: f64,
    groups: usize,
}

impl Chart {
    fn new(title: &str, y_label: &str, y_max: f64, groups: usize) -> Self {
        let y_max = if y_max > 0.0 && y_max.is_finite() { y_max } else { 1.0 };
        let mut body = String::new();
        let _ = write!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = write!(body, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = write!(body, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
        let _ = write!(
            body,
            r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + (H - TOP - BOTTOM) / 2.0,
            escape(y_label)
        );
        let mut c = Chart { body, y_max, groups };
        c.axes();
        c
    }

    fn y(&self, v: f64) -> f64 {
        H - BOTTOM - (v / self.y_max).clamp(0.0, 1.0) * (H - TOP - BOTTOM)
    }

    fn slot(&self, i: usize) -> (f64, f64) {
        let width = (W - LEFT - RIGHT) / self.groups.max(1) as f64;
        (LEFT + width * i as f64, width)
    }

    fn axes(&mut self) {
        for k in 0..=4 {
            let v = self.y_max * k as f64 / 4.0;
            let y = self.y(v);
            let _ = write!(
                self.body,
                r##"<line x1="{LEFT}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
                W - RIGHT,
                LEFT - 6.0,
                y + 4.0,
                tick(v)
            );
        }
        let _ = write!(
            self.body,
            r#"<line x1="{LEFT}" x2="{LEFT}" y1="{TOP}" y2="{}" stroke="black"/><line x1="{LEFT}" x2="{}" y1="{}" y2="{}" stroke="black"/>"#,
            H - BOTTOM,
            W - RIGHT,
            H - BOTTOM,
            H - BOTTOM
        );
    }

    fn label(&mut self, i: usize, text: &str) {
        let (x, w) = self.slot(i);
        let _ = write!(self.body, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, x + w / 2.0, H - BOTTOM + 18.0, escape(text));
    }

    fn rect(&mut self, i: usize, from: f64, to: f64, color: &str) {
        let (x, w) = self.slot(i);
        let (y0, y1) = (self.y(from), self.y(to));
        let _ = write!(
            self.body,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}"/>"#,
            x + w * 0.2,
            y1,
            w * 0.6,
            (y0 - y1).max(0.0)
        );
    }

    fn legend(&mut self, names: &[&str]) {
        for (k, name) in names.iter().enumerate() {
            let x = LEFT + 10.0 + 110.0 * k as f64;
            let _ = write!(
                self.body,
                r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                H - 22.0,
                COLORS[k % COLORS.len()],
                x + 14.0,
                H - 13.0,
                escape(name)
            );
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 10.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

pub fn success_chart(summary: &BenchSummary) -> String {
    let mut c = Chart::new("Success rate", "% of scenes", 100.0, summary.methods.len());
    for (i, m) in summary.methods.iter().enumerate() {
        let pct = 100.0 * m.successes as f64 / m.scenes.max(1) as f64;
        c.rect(i, 0.0, pct, COLORS[0]);
        c.label(i, &m.method);
    }
    c.finish()
}

/// Detection, planning and execution stacked, scenes every method solved.
pub fn time_chart(summary: &BenchSummary) -> String {
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    let top = summary
        .methods
        .iter()
        .map(|m| finite(m.mean_detect) + finite(m.mean_plan) + finite(m.mean_exec))
        .fold(0.0, f64::max);
    let mut c = Chart::new("Mean time per scene", "seconds", top * 1.1, summary.methods.len());
    for (i, m) in summary.methods.iter().enumerate() {
        let mut base = 0.0;
        for (k, v) in [m.mean_detect, m.mean_plan, m.mean_exec].into_iter().enumerate() {
            c.rect(i, base, base + finite(v), COLORS[k]);
            base += finite(v);
        }
        c.label(i, &m.method);
    }
    c.legend(&["detection", "planning", "execution"]);
    c.finish()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn length_chart(rows: &[BenchRow], summary: &BenchSummary) -> String {
    let methods: Vec<&str> = summary.methods.iter().map(|m| m.method.as_str()).collect();
    // Same scene set as the summary statistics.
    let common: BTreeSet<u64> = rows
        .iter()
        .map(|r| r.seed)
        .filter(|s| methods.iter().all(|m| rows.iter().any(|r| r.seed == *s && r.method == *m && r.success)))
        .collect();
    let series: Vec<Vec<f64>> = methods
        .iter()
        .map(|m| {
            let mut v: Vec<f64> =
                rows.iter().filter(|r| r.method == *m && r.success && common.contains(&r.seed)).map(|r| r.length_m).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let top = series.iter().flatten().copied().fold(0.0, f64::max);
    let mut c = Chart::new("Path length", "meters", top * 1.1, methods.len());
    for (i, v) in series.iter().enumerate() {
        c.label(i, methods[i]);
        if v.is_empty() {
            continue;
        }
        let (q1, med, q3) = (quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75));
        let (x, w) = c.slot(i);
        let mid = x + w / 2.0;
        let _ = write!(
            c.body,
            r#"<line x1="{mid:.1}" x2="{mid:.1}" y1="{:.1}" y2="{:.1}" stroke="black"/>"#,
            c.y(v[0]),
            c.y(v[v.len() - 1])
        );
        c.rect(i, q1, q3, COLORS[i % COLORS.len()]);
        let _ = write!(
            c.body,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
            x + w * 0.2,
            x + w * 0.8,
            c.y(med),
            c.y(med)
        );
    }
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b&c"), "a&lt;b&amp;c");
    }
}
