use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Param, SweepResult};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    SuccessRate,
    ErrorMedian,
    /// Median spectral abscissa of the sampled closed loop.
    SampledAbscissaMedian,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::SuccessRate => "success rate",
            Metric::ErrorMedian => "median estimation error",
            Metric::SampledAbscissaMedian => "median sampled closed-loop abscissa",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Metric::SuccessRate => "success_rate",
            Metric::ErrorMedian => "err_median",
            Metric::SampledAbscissaMedian => "abscissa_median",
        }
    }

    fn value(self, r: &SweepResult) -> f64 {
        match self {
            Metric::SuccessRate => r.success_rate,
            Metric::ErrorMedian => r.error.median,
            Metric::SampledAbscissaMedian => r.sampled_abscissa.median,
        }
    }
}

fn series_color(n: usize) -> &'static str {
    match n {
        1 => "blue",
        2 => "red",
        3 => "green",
        4 => "black",
        _ => "gray",
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Line chart of `metric` against the swept parameter, one series per `n`.
///
/// All results must differ only in the swept parameter and `n`.
pub fn render_svg(results: &[SweepResult], metric: Metric) -> Result<String> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidInput("nothing to plot".into()))?;
    let swept = first.swept;
    if results.iter().any(|r| r.swept != swept) {
        return Err(Error::InvalidInput("results mix sweep variables".into()));
    }
    for param in [Param::Tau, Param::SigmaL, Param::SigmaEta, Param::R] {
        if param == swept {
            continue;
        }
        let v = param.value(&first.point);
        if results.iter().any(|r| param.value(&r.point) != v) {
            return Err(Error::InvalidInput(format!(
                "results mix sweep variables: {} varies besides {}",
                param.label(),
                swept.label()
            )));
        }
    }

    let log_x = swept == Param::R;
    let xmap = |x: f64| if log_x { x.log10() } else { x };
    let mut series: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in results {
        series.entry(r.point.n).or_default().push((r.x(), metric.value(r)));
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let xs: Vec<f64> = results.iter().map(|r| xmap(r.x())).collect();
    let (mut x0, mut x1) = min_max(xs.iter().copied());
    if x0 == x1 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let (mut y0, mut y1) = if metric == Metric::SuccessRate {
        (0.0, 1.0)
    } else {
        let ys = results.iter().map(|r| metric.value(r)).filter(|v| v.is_finite());
        let (lo, hi) = min_max(ys);
        if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) }
    };
    if y0 == y1 {
        y0 -= 0.5;
        y1 += 0.5;
    } else if metric != Metric::SuccessRate {
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
    }

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (xmap(x) - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let mut title = format!("{} vs {}", metric.label(), swept.label());
    for param in [Param::Tau, Param::SigmaL, Param::SigmaEta, Param::R] {
        if param != swept {
            let _ = write!(title, ", {}={}", param.label(), fmt_tick(param.value(&first.point)));
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#,
        LEFT + plot_w / 2.0
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );

    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let label = if log_x { 10f64.powf(xv) } else { xv };
        let x = LEFT + f * plot_w;
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{b2:.2}" stroke="#444"/><text x="{x:.2}" y="{t:.2}" text-anchor="middle">{}</text>"##,
            fmt_tick(label),
            b = TOP + plot_h,
            b2 = TOP + plot_h + 5.0,
            t = TOP + plot_h + 19.0,
        );
        let yv = y0 + f * (y1 - y0);
        let y = py(yv);
        let _ = writeln!(
            svg,
            r##"<line x1="{l2:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#444"/><text x="{t:.2}" y="{ty:.2}" text-anchor="end">{}</text>"##,
            fmt_tick(yv),
            l2 = LEFT - 5.0,
            t = LEFT - 8.0,
            ty = y + 4.0,
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        swept.label(),
        if log_x { " (log scale)" } else { "" }
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        metric.label()
    );

    for (slot, (n, pts)) in series.iter().enumerate() {
        let color = series_color(*n);
        let coords: Vec<String> = pts
            .iter()
            .filter(|(_, y)| y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * slot as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">n={n}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn render_plot(results: &[SweepResult], metric: Metric, path: impl AsRef<Path>) -> Result<()> {
    let svg = render_svg(results, metric)?;
    let path = path.as_ref();
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
