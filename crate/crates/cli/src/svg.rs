//! Minimal SVG heatmaps: cells, axes with end labels, and a color bar.

use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    /// Dark blue through teal to yellow, for non-negative data.
    Sequential,
    /// Blue through white to red, symmetric about zero.
    Diverging,
}

pub struct Heatmap<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// `values[row][col]`, row 0 at the bottom (`y_range.0`).
    pub values: &'a [Vec<f64>],
    pub colormap: Colormap,
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

fn ramp(stops: &[[f64; 3]], t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (t.floor() as usize).min(stops.len() - 2);
    lerp(stops[i], stops[i + 1], t - i as f64)
}

fn color(map: Colormap, t: f64) -> String {
    let c = match map {
        Colormap::Sequential => ramp(
            &[
                [68.0, 1.0, 84.0],
                [59.0, 82.0, 139.0],
                [33.0, 145.0, 140.0],
                [94.0, 201.0, 98.0],
                [253.0, 231.0, 37.0],
            ],
            t,
        ),
        Colormap::Diverging => ramp(
            &[
                [33.0, 102.0, 172.0],
                [247.0, 247.0, 247.0],
                [178.0, 24.0, 43.0],
            ],
            t,
        ),
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        c[0].round() as u8,
        c[1].round() as u8,
        c[2].round() as u8
    )
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

impl Heatmap<'_> {
    pub fn render(&self) -> String {
        let rows = self.values.len();
        let cols = self.values.first().map_or(0, Vec::len);
        let (left, top, w, h) = (80.0, 40.0, 480.0, 360.0);
        let finite = self.values.iter().flatten().filter(|v| v.is_finite());
        let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
        if self.colormap == Colormap::Diverging {
            let m = lo.abs().max(hi.abs());
            (lo, hi) = (-m, m);
        }
        if !(hi > lo) {
            hi = lo + 1.0;
        }
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="700" height="460" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            left + w / 2.0,
            self.title
        );
        let (cw, ch) = (w / cols.max(1) as f64, h / rows.max(1) as f64);
        for (r, row) in self.values.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let fill = if v.is_finite() {
                    color(self.colormap, (v - lo) / (hi - lo))
                } else {
                    "#888888".into()
                };
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                    left + c as f64 * cw,
                    top + h - (r + 1) as f64 * ch,
                    cw + 0.3,
                    ch + 0.3
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
        );
        let base = top + h;
        for (x, v, anchor) in [
            (left, self.x_range.0, "start"),
            (left + w, self.x_range.1, "end"),
        ] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{}" text-anchor="{anchor}">{}</text>"#,
                base + 16.0,
                fmt_tick(v)
            );
        }
        for (y, v) in [(base, self.y_range.0), (top + 10.0, self.y_range.1)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#,
                left - 6.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + w / 2.0,
            base + 34.0,
            self.x_label
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
            top + h / 2.0,
            top + h / 2.0,
            self.y_label
        );
        let (bx, steps) = (left + w + 30.0, 50);
        for i in 0..steps {
            let t = (i as f64 + 0.5) / steps as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{bx}" y="{:.2}" width="20" height="{:.2}" fill="{}"/>"#,
                top + h - (i + 1) as f64 * h / steps as f64,
                h / steps as f64 + 0.3,
                color(self.colormap, t)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{top}" width="20" height="{h}" fill="none" stroke="black"/>"#
        );
        for (y, v) in [(base, lo), (top + 10.0, hi)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}">{}</text>"#,
                bx + 26.0,
                fmt_tick(v)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_cell() {
        let values = vec![vec![0.0, 1.0, 2.0], vec![-1.0, f64::NAN, 3.0]];
        let svg = Heatmap {
            title: "t",
            x_label: "x",
            y_label: "y",
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            values: &values,
            colormap: Colormap::Diverging,
        }
        .render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<rect").count(), 6 + 1 + 50 + 1);
        assert!(svg.contains("#888888"));
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(color(Colormap::Diverging, 0.5), "#f7f7f7");
        assert_eq!(color(Colormap::Sequential, 0.0), "#440154");
        assert_eq!(color(Colormap::Sequential, 1.0), "#fde725");
    }
}
