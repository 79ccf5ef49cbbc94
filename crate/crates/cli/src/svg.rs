//! Standalone SVG plots drawn directly from report payloads.

use std::fmt::Write;

use mlaudit::explain::ShapleySummary;

use crate::args::PlotKind;
use crate::error::{CliError, Result};
use crate::report::{Payload, ReportDocument};

const TRADITIONAL: &str = "#1f77b4";
const ADAPTED: &str = "#ff7f0e";
const PANEL_COLORS: [&str; 3] = ["#2ca02c", "#d62728", "#9467bd"];
const LOW: (f64, f64, f64) = (30.0, 136.0, 229.0);
const HIGH: (f64, f64, f64) = (255.0, 13.0, 87.0);

/// Draws `kind` from the report, or fails when the payload does not carry
/// the data that plot needs.
pub fn render_svg(doc: &ReportDocument, kind: PlotKind) -> Result<String> {
    let incompatible = || CliError::IncompatiblePlot {
        kind: kind.name().into(),
        payload: doc.payload.kind().into(),
    };
    match (kind, &doc.payload) {
        (PlotKind::GroupBoxplot, Payload::Contrast(c)) => {
            let r = &c.report;
            let groups: Vec<BoxGroup> = r
                .groups
                .iter()
                .map(|g| BoxGroup {
                    label: g.key.to_string(),
                    traditional: g.traditional_abs_errors.clone(),
                    adapted: g.adapted_abs_errors.clone(),
                })
                .collect();
            let subtitle = match r.rmse_ratio {
                Some(x) => format!("adapted / traditional pooled RMSE = {}", fmt_num(x)),
                None => "adapted / traditional pooled RMSE unbounded".into(),
            };
            Ok(group_boxplot(
                &r.model_id,
                &subtitle,
                &r.group_features.join(", "),
                &groups,
            ))
        }
        (PlotKind::PredScatter, Payload::Omission(o)) => {
            let panels = [&o.a, &o.b, &o.c]
                .iter()
                .zip(PANEL_COLORS)
                .map(|(v, color)| ScatterPanel {
                    name: v.name.clone(),
                    title: format!(
                        "{}: {} features, test R² {}",
                        v.name,
                        v.features.len(),
                        fmt_num(v.test.r2)
                    ),
                    color,
                    actual: v.test_actual.clone(),
                    predicted: v.test_predicted.clone(),
                })
                .collect::<Vec<_>>();
            let title = format!(
                "Predicted vs actual on held-out rows (omitting {})",
                o.config.omit
            );
            Ok(pred_scatter(&title, &panels))
        }
        (PlotKind::PredScatter, Payload::Contrast(c)) => {
            let r = &c.report;
            let panel =
                |name: &str, title: &str, color, cv: &mlaudit::validation::CvResult| ScatterPanel {
                    name: name.into(),
                    title: format!("{title}, RMSE {}", fmt_num(cv.pooled.rmse)),
                    color,
                    actual: cv.predictions.iter().map(|p| p.y).collect(),
                    predicted: cv.predictions.iter().map(|p| p.yhat).collect(),
                };
            let panels = [
                panel(
                    "traditional",
                    "traditional k-fold",
                    TRADITIONAL,
                    &r.traditional,
                ),
                panel("adapted", "adapted (grouped)", ADAPTED, &r.adapted),
            ];
            Ok(pred_scatter(
                &format!("Out-of-fold predictions: {}", r.model_id),
                &panels,
            ))
        }
        (PlotKind::PredScatter, Payload::Cv(c)) => {
            let r = &c.result;
            let panels = [ScatterPanel {
                name: "cv".into(),
                title: format!("pooled RMSE {}", fmt_num(r.pooled.rmse)),
                color: TRADITIONAL,
                actual: r.predictions.iter().map(|p| p.y).collect(),
                predicted: r.predictions.iter().map(|p| p.yhat).collect(),
            }];
            Ok(pred_scatter(
                &format!("Out-of-fold predictions: {}", r.model_id),
                &panels,
            ))
        }
        (PlotKind::ShapBeeswarm, Payload::Shapley(s)) => Ok(beeswarm(
            &format!("Shapley values: {}", s.model_id),
            &[(String::new(), &s.summary)],
        )),
        (PlotKind::ShapBeeswarm, Payload::Underspec(u)) if !u.explanations.is_empty() => {
            let panels: Vec<(String, &ShapleySummary)> = u
                .explanations
                .iter()
                .map(|e| {
                    let s = &u.subsets[e.subset];
                    (
                        format!(
                            "subset {}: {} (test R² {})",
                            e.subset,
                            s.features.join(", "),
                            fmt_num(s.test.r2)
                        ),
                        &e.summary,
                    )
                })
                .collect();
            Ok(beeswarm(
                "Shapley values of near-equivalent subsets",
                &panels,
            ))
        }
        _ => Err(incompatible()),
    }
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Short human-readable number.
fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{x:.2e}")
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Affine map from data interval `d` onto pixel interval `r`.
#[derive(Clone, Copy)]
struct Scale {
    d: (f64, f64),
    r: (f64, f64),
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        self.r.0 + (v - self.d.0) / (self.d.1 - self.d.0) * (self.r.1 - self.r.0)
    }
}

/// Finite extent of `values`, widened to a nonzero span.
fn extent(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.into_iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.04;
    (lo - pad, hi + pad)
}

/// Round-numbered ticks covering `[lo, hi]`: steps of 1, 2 or 5 times a power of ten.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            out,
            r#"<rect width="{width}" height="{height}" fill="white"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text class="title" x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            width / 2.0,
            esc(title)
        );
        Canvas { out }
    }

    fn raw(&mut self, s: &str) {
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn text(&mut self, class: &str, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.out,
            r#"<text class="{class}" x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
    }

    fn line(&mut self, class: &str, a: (f64, f64), b: (f64, f64), stroke: &str, extra: &str) {
        let _ = writeln!(
            self.out,
            r#"<line class="{class}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" {extra}/>"#,
            a.0, a.1, b.0, b.1
        );
    }

    /// Frame, ticks and axis labels for a plot area.
    fn axes(&mut self, xs: Scale, ys: Scale, xlabel: &str, ylabel: &str, x_ticks: bool) {
        let (x0, x1) = (xs.r.0, xs.r.1);
        let (y0, y1) = (ys.r.1, ys.r.0);
        let _ = writeln!(
            self.out,
            r##"<rect class="frame" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444444"/>"##,
            x1 - x0,
            y1 - y0
        );
        for t in ticks(ys.d.0, ys.d.1, 6) {
            let y = ys.map(t);
            self.line("tick", (x0 - 4.0, y), (x0, y), "#444", "");
            self.line("grid", (x0, y), (x1, y), "#ddd", r#"stroke-width="0.5""#);
            self.text("tick-label", x0 - 6.0, y + 4.0, "end", &fmt_num(t));
        }
        if x_ticks {
            for t in ticks(xs.d.0, xs.d.1, 5) {
                let x = xs.map(t);
                self.line("tick", (x, y1), (x, y1 + 4.0), "#444", "");
                self.text("tick-label", x, y1 + 16.0, "middle", &fmt_num(t));
            }
            self.text("axis-label", (x0 + x1) / 2.0, y1 + 34.0, "middle", xlabel);
        }
        let (cx, cy) = (x0 - 48.0, (y0 + y1) / 2.0);
        let _ = writeln!(
            self.out,
            r#"<text class="axis-label" x="{cx:.2}" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 {cx:.2} {cy:.2})">{}</text>"#,
            esc(ylabel)
        );
    }

    /// Legend of colored swatches starting at `(x, y)`.
    fn legend(&mut self, x: f64, y: f64, entries: &[(&str, &str)]) {
        self.raw(r#"<g class="legend">"#);
        for (i, (color, label)) in entries.iter().enumerate() {
            let yy = y + i as f64 * 18.0;
            let _ = writeln!(
                self.out,
                r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{color}" fill-opacity="0.6" stroke="{color}"/>"#,
                yy - 10.0
            );
            self.text("legend-label", x + 18.0, yy, "start", label);
        }
        self.raw("</g>");
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

struct BoxGroup {
    label: String,
    traditional: Vec<f64>,
    adapted: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

struct BoxStats {
    q1: f64,
    median: f64,
    q3: f64,
    lo_whisker: f64,
    hi_whisker: f64,
    outliers: Vec<f64>,
}

/// Tukey box: whiskers reach the farthest points within 1.5 IQR.
fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let (lo_fence, hi_fence) = (q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1));
    let inside = v
        .iter()
        .copied()
        .filter(|x| (lo_fence..=hi_fence).contains(x));
    let (lo_whisker, hi_whisker) = inside.fold((q1, q3), |(a, b), x| (a.min(x), b.max(x)));
    Some(BoxStats {
        q1,
        median,
        q3,
        lo_whisker,
        hi_whisker,
        outliers: v
            .into_iter()
            .filter(|x| !(lo_fence..=hi_fence).contains(x))
            .collect(),
    })
}

fn draw_box(
    c: &mut Canvas,
    class: &str,
    color: &str,
    center: f64,
    width: f64,
    ys: Scale,
    values: &[f64],
) {
    let Some(s) = box_stats(values) else { return };
    let (l, r) = (center - width / 2.0, center + width / 2.0);
    let _ = writeln!(c.out, r#"<g class="box {class}">"#);
    c.line(
        "whisker",
        (center, ys.map(s.lo_whisker)),
        (center, ys.map(s.q1)),
        color,
        "",
    );
    c.line(
        "whisker",
        (center, ys.map(s.q3)),
        (center, ys.map(s.hi_whisker)),
        color,
        "",
    );
    c.line(
        "cap",
        (l + width * 0.25, ys.map(s.lo_whisker)),
        (r - width * 0.25, ys.map(s.lo_whisker)),
        color,
        "",
    );
    c.line(
        "cap",
        (l + width * 0.25, ys.map(s.hi_whisker)),
        (r - width * 0.25, ys.map(s.hi_whisker)),
        color,
        "",
    );
    let _ = writeln!(
        c.out,
        r#"<rect class="iqr" x="{l:.2}" y="{:.2}" width="{width:.2}" height="{:.2}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"#,
        ys.map(s.q3),
        (ys.map(s.q1) - ys.map(s.q3)).max(0.5)
    );
    c.line(
        "median",
        (l, ys.map(s.median)),
        (r, ys.map(s.median)),
        color,
        r#"stroke-width="2""#,
    );
    for o in s.outliers {
        let _ = writeln!(
            c.out,
            r#"<circle class="outlier" cx="{center:.2}" cy="{:.2}" r="1.6" fill="none" stroke="{color}"/>"#,
            ys.map(o)
        );
    }
    c.raw("</g>");
}

fn group_boxplot(
    model_id: &str,
    subtitle: &str,
    group_features: &str,
    groups: &[BoxGroup],
) -> String {
    let pair_width = 64.0;
    let (left, right, top, bottom) = (80.0, 200.0, 60.0, 120.0);
    let plot_w = (pair_width * groups.len() as f64).max(360.0);
    let plot_h = 360.0;
    let (width, height) = (left + plot_w + right, top + plot_h + bottom);
    let mut c = Canvas::new(
        width,
        height,
        &format!("Absolute error by group: {model_id}"),
    );
    c.text("subtitle", width / 2.0, 40.0, "middle", subtitle);

    let all = groups
        .iter()
        .flat_map(|g| g.traditional.iter().chain(&g.adapted).copied());
    let (_, hi) = extent(all);
    let ys = Scale {
        d: (0.0, hi.max(f64::MIN_POSITIVE)),
        r: (top + plot_h, top),
    };
    let xs = Scale {
        d: (0.0, groups.len().max(1) as f64),
        r: (left, left + plot_w),
    };
    c.axes(xs, ys, "", "absolute error", false);

    let slot = plot_w / groups.len().max(1) as f64;
    for (i, g) in groups.iter().enumerate() {
        let center = left + slot * (i as f64 + 0.5);
        let _ = writeln!(c.out, r#"<g class="pair" data-group="{}">"#, esc(&g.label));
        draw_box(
            &mut c,
            "traditional",
            TRADITIONAL,
            center - slot * 0.2,
            slot * 0.32,
            ys,
            &g.traditional,
        );
        draw_box(
            &mut c,
            "adapted",
            ADAPTED,
            center + slot * 0.2,
            slot * 0.32,
            ys,
            &g.adapted,
        );
        let (lx, ly) = (center, top + plot_h + 14.0);
        let _ = writeln!(
            c.out,
            r#"<text class="group-label" x="{lx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-35 {lx:.2} {ly:.2})">{}</text>"#,
            esc(&g.label)
        );
        c.raw("</g>");
    }
    c.text(
        "axis-label",
        left + plot_w / 2.0,
        height - 12.0,
        "middle",
        &format!("group ({group_features})"),
    );
    c.legend(
        left + plot_w + 24.0,
        top + 12.0,
        &[
            (TRADITIONAL, "traditional k-fold"),
            (ADAPTED, "adapted (grouped)"),
        ],
    );
    c.finish()
}

struct ScatterPanel {
    name: String,
    title: String,
    color: &'static str,
    actual: Vec<f64>,
    predicted: Vec<f64>,
}

fn pred_scatter(title: &str, panels: &[ScatterPanel]) -> String {
    let (side, gap, left, top, bottom) = (300.0, 90.0, 80.0, 70.0, 110.0);
    let width = left + panels.len() as f64 * (side + gap) + 20.0;
    let height = top + side + bottom;
    let mut c = Canvas::new(width, height, title);
    // One shared range on both axes keeps y = x diagonal in every panel.
    let (lo, hi) = extent(
        panels
            .iter()
            .flat_map(|p| p.actual.iter().chain(&p.predicted).copied()),
    );
    for (i, p) in panels.iter().enumerate() {
        let x0 = left + i as f64 * (side + gap);
        let xs = Scale {
            d: (lo, hi),
            r: (x0, x0 + side),
        };
        let ys = Scale {
            d: (lo, hi),
            r: (top + side, top),
        };
        let _ = writeln!(c.out, r#"<g class="panel" data-name="{}">"#, esc(&p.name));
        c.text(
            "panel-title",
            x0 + side / 2.0,
            top - 10.0,
            "middle",
            &p.title,
        );
        c.axes(xs, ys, "actual", "predicted", true);
        c.line(
            "identity",
            (xs.map(lo), ys.map(lo)),
            (xs.map(hi), ys.map(hi)),
            "#555",
            r#"stroke-dasharray="5,4""#,
        );
        for (a, f) in p.actual.iter().zip(&p.predicted) {
            if a.is_finite() && f.is_finite() {
                let _ = writeln!(
                    c.out,
                    r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="2.2" fill="{}" fill-opacity="0.55"/>"#,
                    xs.map(*a),
                    ys.map(*f),
                    p.color
                );
            }
        }
        c.raw("</g>");
    }
    let entries: Vec<(&str, &str)> = panels.iter().map(|p| (p.color, p.name.as_str())).collect();
    let legend_y = top + side + 62.0;
    c.legend(left, legend_y, &entries[..entries.len().min(1)]);
    for (i, e) in entries.iter().enumerate().skip(1) {
        c.legend(left + i as f64 * 140.0, legend_y, &[*e]);
    }
    let lx = left + entries.len() as f64 * 140.0;
    c.raw(r#"<g class="legend">"#);
    c.line(
        "legend-identity",
        (lx, legend_y - 4.0),
        (lx + 24.0, legend_y - 4.0),
        "#555",
        r#"stroke-dasharray="5,4""#,
    );
    c.text("legend-label", lx + 30.0, legend_y, "start", "y = x");
    c.raw("</g>");
    c.finish()
}

fn blend(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(LOW.0, HIGH.0),
        mix(LOW.1, HIGH.1),
        mix(LOW.2, HIGH.2)
    )
}

/// Vertical offsets that stack points sharing a pixel bin, alternating up
/// and down and clamped to the row half-height.
fn swarm_offsets(px: &[f64], half: f64) -> Vec<f64> {
    let mut counts = std::collections::HashMap::new();
    px.iter()
        .map(|x| {
            let n: &mut i64 = counts.entry((x / 3.0).floor() as i64).or_insert(0);
            let k = *n;
            *n += 1;
            let step = ((k + 1) / 2) as f64 * 2.0;
            let off = if k % 2 == 1 { step } else { -step };
            off.clamp(-half, half)
        })
        .collect()
}

fn beeswarm(title: &str, panels: &[(String, &ShapleySummary)]) -> String {
    let (left, plot_w, right, row_h) = (150.0, 460.0, 120.0, 28.0);
    let heights: Vec<f64> = panels
        .iter()
        .map(|(_, s)| s.features.len().max(1) as f64 * row_h + 90.0)
        .collect();
    let width = left + plot_w + right;
    let height = 50.0 + heights.iter().sum::<f64>();
    let mut c = Canvas::new(width, height, title);
    let mut top = 60.0;
    for ((label, summary), h) in panels.iter().zip(&heights) {
        let rows = summary.ranking();
        let plot_h = rows.len().max(1) as f64 * row_h;
        let (lo, hi) = extent(
            summary
                .features
                .iter()
                .flat_map(|f| f.phi.iter().copied())
                .chain([0.0]),
        );
        let xs = Scale {
            d: (lo, hi),
            r: (left, left + plot_w),
        };
        let ys = Scale {
            d: (0.0, rows.len().max(1) as f64),
            r: (top + plot_h, top),
        };
        let _ = writeln!(c.out, r#"<g class="panel" data-name="{}">"#, esc(label));
        if !label.is_empty() {
            c.text(
                "panel-title",
                left + plot_w / 2.0,
                top - 8.0,
                "middle",
                label,
            );
        }
        let _ = writeln!(
            c.out,
            r##"<rect class="frame" x="{left:.2}" y="{top:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#444444"/>"##
        );
        for t in ticks(lo, hi, 5) {
            let x = xs.map(t);
            c.line(
                "tick",
                (x, top + plot_h),
                (x, top + plot_h + 4.0),
                "#444",
                "",
            );
            c.text("tick-label", x, top + plot_h + 16.0, "middle", &fmt_num(t));
        }
        c.line(
            "zero",
            (xs.map(0.0), top),
            (xs.map(0.0), top + plot_h),
            "#888",
            "",
        );
        c.text(
            "axis-label",
            left + plot_w / 2.0,
            top + plot_h + 34.0,
            "middle",
            "Shapley value (impact on prediction)",
        );
        for (r, name) in rows.iter().enumerate() {
            let f = summary.feature(name).expect("ranked feature exists");
            let cy = ys.map(rows.len() as f64 - r as f64 - 0.5);
            let _ = writeln!(
                c.out,
                r#"<g class="feature-row" data-feature="{}">"#,
                esc(name)
            );
            c.text("feature-label", left - 8.0, cy + 4.0, "end", name);
            let (vlo, vhi) = f
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(*v), b.max(*v))
                });
            let px: Vec<f64> = f.phi.iter().map(|p| xs.map(*p)).collect();
            let offsets = swarm_offsets(&px, row_h * 0.4);
            for ((x, dy), v) in px.iter().zip(offsets).zip(&f.values) {
                if !x.is_finite() {
                    continue;
                }
                let t = if vhi > vlo {
                    (v - vlo) / (vhi - vlo)
                } else {
                    0.5
                };
                let _ = writeln!(
                    c.out,
                    r#"<circle class="point" cx="{x:.2}" cy="{:.2}" r="2.4" fill="{}" fill-opacity="0.8"/>"#,
                    cy + dy,
                    blend(t)
                );
            }
            c.raw("</g>");
        }
        c.raw("</g>");
        top += h;
    }
    // Color bar keyed to each feature's own value range.
    let (bx, by) = (left + plot_w + 30.0, 70.0);
    c.raw(r#"<g class="legend">"#);
    for i in 0..20 {
        let _ = writeln!(
            c.out,
            r#"<rect x="{bx:.2}" y="{:.2}" width="12" height="6" fill="{}"/>"#,
            by + (19 - i) as f64 * 6.0,
            blend(i as f64 / 19.0)
        );
    }
    c.text("legend-label", bx + 18.0, by + 8.0, "start", "high");
    c.text("legend-label", bx + 18.0, by + 120.0, "start", "low");
    c.text("legend-label", bx, by - 8.0, "start", "feature value");
    c.raw("</g>");
    c.finish()
}
