//! Minimal SVG figures: plans over the channel mask, and tracking runs.

use std::fmt::Write;

use flownav::simloop::SimTrace;
use flownav::{ChannelMask, Vec2};

const PALETTE: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

pub struct Layer<'a> {
    pub label: &'a str,
    pub points: &'a [Vec2],
}

fn polyline(out: &mut String, pts: impl Iterator<Item = (f64, f64)>, style: &str) {
    out.push_str("<polyline fill=\"none\" ");
    out.push_str(style);
    out.push_str(" points=\"");
    for (x, y) in pts {
        let _ = write!(out, "{x:.3},{y:.3} ");
    }
    out.push_str("\"/>\n");
}

/// Mask in pixel units (SOLID gray, one rect per horizontal run) with the paths on top.
pub fn plan_svg(mask: &ChannelMask, layers: &[Layer], start: Vec2, goal: Vec2) -> String {
    let (w, h) = mask.dims();
    let px = mask.pixel_size();
    let scale = (800.0 / w as f64).max(1.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {w} {h}\">",
        w as f64 * scale,
        h as f64 * scale
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    s.push_str("<g fill=\"#888\">\n");
    for r in 0..h {
        let mut c = 0;
        while c < w {
            if mask.is_fluid(r, c) {
                c += 1;
                continue;
            }
            let c0 = c;
            while c < w && !mask.is_fluid(r, c) {
                c += 1;
            }
            let _ = writeln!(
                s,
                "<rect x=\"{c0}\" y=\"{r}\" width=\"{}\" height=\"1\"/>",
                c - c0
            );
        }
    }
    s.push_str("</g>\n");
    let stroke = 1.5 / scale;
    for (i, layer) in layers.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, "<g class=\"path\" id=\"{}\">", layer.label);
        polyline(
            &mut s,
            layer.points.iter().map(|p| (p.x / px, p.y / px)),
            &format!("stroke=\"{color}\" stroke-width=\"{stroke:.3}\""),
        );
        s.push_str("</g>\n");
        let _ = writeln!(
            s,
            "<text x=\"1\" y=\"{:.2}\" font-size=\"{:.2}\" fill=\"{color}\">{}</text>",
            (i as f64 + 1.0) * 14.0 / scale,
            12.0 / scale,
            layer.label
        );
    }
    for (p, color) in [(start, "#2ca02c"), (goal, "#000")] {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"{color}\"/>",
            p.x / px,
            p.y / px,
            4.0 / scale
        );
    }
    s.push_str("</svg>\n");
    s
}

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    lo: (f64, f64),
    hi: (f64, f64),
}

impl Panel {
    fn fit(x0: f64, pts: impl Iterator<Item = (f64, f64)> + Clone, equal: bool) -> Panel {
        let (mut lo, mut hi) = (
            (f64::INFINITY, f64::INFINITY),
            (f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for (x, y) in pts {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        if !lo.0.is_finite() {
            lo = (0.0, 0.0);
            hi = (1.0, 1.0);
        }
        let pad = |a: &mut f64, b: &mut f64| {
            let d = (*b - *a).max(1e-12) * 0.05;
            *a -= d;
            *b += d;
        };
        pad(&mut lo.0, &mut hi.0);
        pad(&mut lo.1, &mut hi.1);
        if equal {
            let span = (hi.0 - lo.0).max(hi.1 - lo.1);
            let c = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
            lo = (c.0 - span / 2.0, c.1 - span / 2.0);
            hi = (c.0 + span / 2.0, c.1 + span / 2.0);
        }
        Panel {
            x0,
            y0: 30.0,
            w: 360.0,
            h: 360.0,
            lo,
            hi,
        }
    }

    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            self.x0 + (x - self.lo.0) / (self.hi.0 - self.lo.0) * self.w,
            self.y0 + self.h - (y - self.lo.1) / (self.hi.1 - self.lo.1) * self.h,
        )
    }

    fn frame(&self, s: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
            self.x0, self.y0, self.w, self.h
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"20\" font-size=\"13\">{title}</text>",
            self.x0
        );
        let below = self.y0 + self.h + 16.0;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{below}\" font-size=\"10\">{:.3e}</text>\
             <text x=\"{}\" y=\"{below}\" font-size=\"10\" text-anchor=\"end\">{:.3e}</text>\
             <text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{xlabel}</text>",
            self.x0,
            self.lo.0,
            self.x0 + self.w,
            self.hi.0,
            self.x0 + self.w / 2.0,
            below + 14.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\">{:.3e}</text>\
             <text x=\"{}\" y=\"{}\" font-size=\"10\">{:.3e}</text>\
             <text x=\"{}\" y=\"{}\" font-size=\"11\">{ylabel}</text>",
            self.x0 + 3.0,
            self.y0 + self.h - 3.0,
            self.lo.1,
            self.x0 + 3.0,
            self.y0 + 11.0,
            self.hi.1,
            self.x0 + 3.0,
            self.y0 + 24.0
        );
    }
}

/// Two panels: reference against actual path in the plane, and tracking error norm over
/// time.
pub fn track_svg(trace: &SimTrace, title: &str) -> String {
    let samples = &trace.samples;
    let xy = samples.iter().flat_map(|s| [(s.xd, s.yd), (s.x, s.y)]);
    let path = Panel::fit(40.0, xy, true);
    let err = samples.iter().map(|s| (s.t, s.error().norm()));
    let err_panel = Panel::fit(440.0, err.clone().chain([(0.0, 0.0)]), false);

    let mut s = String::new();
    s.push_str("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"840\" height=\"430\">\n");
    s.push_str("<rect width=\"840\" height=\"430\" fill=\"white\"/>\n");
    path.frame(&mut s, &format!("{title}: path"), "x [m]", "y [m]");
    s.push_str("<g id=\"reference\">\n");
    polyline(
        &mut s,
        samples.iter().map(|q| path.map((q.xd, q.yd))),
        "stroke=\"#888\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\"",
    );
    s.push_str("</g>\n<g id=\"actual\">\n");
    polyline(
        &mut s,
        samples.iter().map(|q| path.map((q.x, q.y))),
        "stroke=\"#d62728\" stroke-width=\"1.2\"",
    );
    s.push_str("</g>\n");
    err_panel.frame(&mut s, "tracking error", "t [s]", "|e| [m]");
    s.push_str("<g id=\"error\">\n");
    polyline(
        &mut s,
        err.map(|p| err_panel.map(p)),
        "stroke=\"#1f77b4\" stroke-width=\"1.2\"",
    );
    s.push_str("</g>\n</svg>\n");
    s
}
