//! SVG figure generation: the speaker-landscape scatter and the
//! per-group similarity density curves. Plain XML text output, no
//! graphics dependency, so figures are testable as documents.

use std::collections::BTreeMap;

use crate::analysis::SimilarityDistribution;

/// Matplotlib tab10, the conventional categorical palette.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const NOT_INTERPRETABLE: &str = "Axes and distances are not directly interpretable.";

/// One marker in a scatter: a token with its group label and 2D position.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub token: String,
    pub group: String,
    pub x: f64,
    pub y: f64,
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn color_for(index: usize) -> &'static str {
    PALETTE[index % PALETTE.len()]
}

struct Frame {
    x0: f64,
    y0: f64,
    width: f64,
    height: f64,
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>, x0: f64, y0: f64, w: f64, h: f64) -> Frame {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for (x, y) in points {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        if !min_x.is_finite() {
            (min_x, max_x, min_y, max_y) = (0.0, 1.0, 0.0, 1.0);
        }
        // pad 5%, guard degenerate spans
        let span_x = (max_x - min_x).max(1e-9);
        let span_y = (max_y - min_y).max(1e-9);
        Frame {
            x0,
            y0,
            width: w,
            height: h,
            min_x: min_x - 0.05 * span_x,
            max_x: max_x + 0.05 * span_x,
            min_y: min_y - 0.05 * span_y,
            max_y: max_y + 0.05 * span_y,
        }
    }

    fn sx(&self, x: f64) -> f64 {
        self.x0 + (x - self.min_x) / (self.max_x - self.min_x) * self.width
    }

    fn sy(&self, y: f64) -> f64 {
        // flip: SVG y grows downward
        self.y0 + self.height - (y - self.min_y) / (self.max_y - self.min_y) * self.height
    }
}

/// The landscape scatter: one marker per speaker point, colored by group,
/// with a legend and an optional topic-keyword overlay (squares plus
/// keyword labels, colored by topic).
pub fn plot_landscape(points: &[PlotPoint], overlay: &[PlotPoint]) -> String {
    let (width, height) = (900.0, 640.0);
    let frame = Frame::fit(
        points.iter().chain(overlay).map(|p| (p.x, p.y)),
        50.0,
        40.0,
        650.0,
        540.0,
    );

    let mut groups: Vec<String> = points.iter().map(|p| p.group.clone()).collect();
    groups.sort();
    groups.dedup();
    let mut topics: Vec<String> = overlay.iter().map(|p| p.group.clone()).collect();
    topics.sort();
    topics.dedup();

    let group_color: BTreeMap<&str, &str> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| (g.as_str(), color_for(i)))
        .collect();
    let topic_color: BTreeMap<&str, &str> = topics
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), color_for(groups.len() + i)))
        .collect();

    let mut svg = String::new();
    svg.push_str(&format!(
        r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">
<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>
<rect x="50" y="40" width="650" height="540" fill="none" stroke="#cccccc" stroke-width="1"/>
<text x="50" y="25" font-family="sans-serif" font-size="14">Speaker landscape</text>
"##
    ));

    svg.push_str("<g id=\"points\">\n");
    for p in points {
        svg.push_str(&format!(
            "<circle class=\"pt\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.75\"><title>{}</title></circle>\n",
            frame.sx(p.x),
            frame.sy(p.y),
            group_color.get(p.group.as_str()).copied().unwrap_or("#000000"),
            escape_xml(&p.token),
        ));
    }
    svg.push_str("</g>\n");

    if !overlay.is_empty() {
        svg.push_str("<g id=\"overlay\">\n");
        for p in overlay {
            let color = topic_color
                .get(p.group.as_str())
                .copied()
                .unwrap_or("#000000");
            let (x, y) = (frame.sx(p.x), frame.sy(p.y));
            svg.push_str(&format!(
                "<rect class=\"kw\" x=\"{:.3}\" y=\"{:.3}\" width=\"5\" height=\"5\" fill=\"{color}\"/>\n",
                x - 2.5,
                y - 2.5,
            ));
            svg.push_str(&format!(
                "<text x=\"{:.3}\" y=\"{:.3}\" font-family=\"sans-serif\" font-size=\"8\" fill=\"{color}\">{}</text>\n",
                x + 4.0,
                y + 3.0,
                escape_xml(&p.token),
            ));
        }
        svg.push_str("</g>\n");
    }

    svg.push_str("<g id=\"legend\">\n");
    let mut ly = 60.0;
    for g in &groups {
        svg.push_str(&format!(
            "<circle class=\"sw\" cx=\"720\" cy=\"{ly}\" r=\"5\" fill=\"{}\"/>\n",
            group_color[g.as_str()],
        ));
        svg.push_str(&format!(
            "<text class=\"legend-entry\" x=\"732\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            ly + 4.0,
            escape_xml(g),
        ));
        ly += 22.0;
    }
    for t in &topics {
        svg.push_str(&format!(
            "<rect class=\"sw\" x=\"715\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            ly - 5.0,
            topic_color[t.as_str()],
        ));
        svg.push_str(&format!(
            "<text class=\"legend-entry\" x=\"732\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            ly + 4.0,
            escape_xml(t),
        ));
        ly += 22.0;
    }
    svg.push_str("</g>\n");

    svg.push_str(&format!(
        "<text x=\"50\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#555555\">{}</text>\n",
        height - 15.0,
        NOT_INTERPRETABLE,
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Gaussian kernel density on a fixed grid over [−1, 1]. Bandwidth by
/// Silverman's rule with a floor so single-valued samples render as a
/// narrow spike instead of failing.
pub(crate) fn kde_curve(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    const GRID: usize = 256;
    let grid: Vec<f64> = (0..GRID)
        .map(|i| -1.0 + 2.0 * i as f64 / (GRID - 1) as f64)
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f) as usize];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    let h = (0.9 * spread * n.powf(-0.2)).max(0.01);
    let density: Vec<f64> = grid
        .iter()
        .map(|&x| {
            values
                .iter()
                .map(|&v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                / (n * h * (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect();
    (grid, density)
}

/// Density curves of the given similarity distributions on a shared
/// [−1, 1] axis, one colored curve per distribution, with a legend.
pub fn plot_distributions(distributions: &[SimilarityDistribution]) -> String {
    let (width, height) = (900.0, 540.0);
    let (x0, y0, w, h) = (60.0, 40.0, 640.0, 440.0);

    let curves: Vec<(&SimilarityDistribution, Vec<f64>, Vec<f64>)> = distributions
        .iter()
        .map(|d| {
            let (grid, density) = kde_curve(&d.values);
            (d, grid, density)
        })
        .collect();
    let max_density = curves
        .iter()
        .flat_map(|(_, _, d)| d.iter().copied())
        .fold(1e-12, f64::max);

    let mut labels: Vec<&str> = distributions.iter().map(|d| d.label.as_str()).collect();
    labels.sort();
    labels.dedup();
    let color_of: BTreeMap<&str, &str> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (*l, color_for(i)))
        .collect();

    let sx = |x: f64| x0 + (x + 1.0) / 2.0 * w;
    let sy = |d: f64| y0 + h - d / max_density * h;

    let mut svg = String::new();
    svg.push_str(&format!(
        r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">
<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>
<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#cccccc" stroke-width="1"/>
<text x="{x0}" y="25" font-family="sans-serif" font-size="14">Within-group cosine similarity</text>
"##
    ));

    // x-axis ticks
    for tick in [-1.0f64, -0.5, 0.0, 0.5, 1.0] {
        let tx = sx(tick);
        svg.push_str(&format!(
            "<line x1=\"{tx:.2}\" y1=\"{:.2}\" x2=\"{tx:.2}\" y2=\"{:.2}\" stroke=\"#cccccc\"/>\n",
            y0 + h,
            y0 + h + 6.0,
        ));
        svg.push_str(&format!(
            "<text x=\"{tx:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{tick}</text>\n",
            y0 + h + 20.0,
        ));
    }

    for (dist, grid, density) in &curves {
        let mut path = String::from("M");
        for (i, (&x, &d)) in grid.iter().zip(density.iter()).enumerate() {
            if i > 0 {
                path.push_str(" L");
            }
            path.push_str(&format!(" {:.3} {:.3}", sx(x), sy(d)));
        }
        let color = color_of
            .get(dist.label.as_str())
            .copied()
            .unwrap_or("#000000");
        svg.push_str(&format!(
            "<path class=\"curve\" d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
        ));
    }

    let mut ly = 60.0;
    for label in &labels {
        svg.push_str(&format!(
            "<line x1=\"715\" y1=\"{ly}\" x2=\"735\" y2=\"{ly}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            color_of[label],
        ));
        svg.push_str(&format!(
            "<text class=\"legend-entry\" x=\"742\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            ly + 4.0,
            escape_xml(label),
        ));
        ly += 22.0;
    }

    svg.push_str(&format!(
        "<text x=\"{x0}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#555555\">Curves are kernel density estimates of pairwise cosine similarity.</text>\n",
        height - 15.0,
    ));
    svg.push_str("</svg>\n");
    svg
}
