//! Minimal SVG heatmaps.

use std::fmt::Write;

/// A labelled matrix of values; `NaN` cells are drawn empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

const CELL_W: f64 = 70.0;
const CELL_H: f64 = 28.0;
const LEFT: f64 = 120.0;
const TOP: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// White-to-dark-red ramp on `[0, 1]`.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let g = (255.0 * (1.0 - t)).round() as u8;
    let r = (255.0 - 100.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}{g:02x}")
}

impl Heatmap {
    /// Renders with colours scaled logarithmically over `[lo, hi]`.
    pub fn render(&self, lo: f64, hi: f64) -> String {
        let rows = self.row_labels.len() as f64;
        let cols = self.col_labels.len() as f64;
        let width = LEFT + CELL_W * cols + 10.0;
        let height = TOP + CELL_H * rows + 30.0;
        let (llo, lhi) = (lo.max(1e-12).ln(), hi.max(1e-12).ln());
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14">{}</text>"#, LEFT, escape(&self.title));
        for (j, label) in self.col_labels.iter().enumerate() {
            let x = LEFT + CELL_W * (j as f64 + 0.5);
            let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, TOP - 6.0, escape(label));
        }
        for (i, label) in self.row_labels.iter().enumerate() {
            let y = TOP + CELL_H * i as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + CELL_H * 0.65,
                escape(label)
            );
            for (j, &v) in self.values[i].iter().enumerate() {
                let x = LEFT + CELL_W * j as f64;
                let fill = if v.is_finite() && lhi > llo {
                    color((v.max(1e-12).ln() - llo) / (lhi - llo))
                } else if v.is_finite() {
                    color(0.5)
                } else {
                    "none".to_string()
                };
                let _ = writeln!(
                    s,
                    r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" stroke="#888"/>"##
                );
                let text = if v.is_finite() { format!("{v:.3}") } else { "-".to_string() };
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle">{text}</text>"#,
                    x + CELL_W / 2.0,
                    y + CELL_H * 0.65
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}
