//! Self-contained SVG output.

use std::fmt::Write;

/// Viridis-like ramp, `x` in `[0, 1]`.
fn color(x: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let x = x.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let t = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |u: f64, v: f64| (u + (v - u) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heatmap of an envelope: power level on the y axis (positive at the
/// top), start time of day on the x axis, colour = sustainable steps.
pub fn envelope_heatmap(
    title: &str,
    power_grid: &[f64],
    start_minutes: &[u64],
    durations: &[Vec<usize>],
    cap_steps: usize,
) -> String {
    let (cell_w, cell_h) = (24.0, 14.0);
    let (left, top) = (60.0, 40.0);
    let n_t = start_minutes.len();
    let n_p = power_grid.len();
    let width = left + cell_w * n_t as f64 + 90.0;
    let height = top + cell_h * n_p as f64 + 50.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="13">{}</text>"#, escape(title));
    for (row, i) in (0..n_p).rev().enumerate() {
        let y = top + row as f64 * cell_h;
        for j in 0..n_t {
            let x = left + j as f64 * cell_w;
            let d = durations[i][j];
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{}"><title>p={} t={} d={d}</title></rect>"#,
                color(d as f64 / cap_steps.max(1) as f64),
                power_grid[i],
                start_minutes[j]
            );
        }
        if i % 2 == 0 || n_p <= 11 {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#, left - 4.0, y + cell_h - 3.0, power_grid[i]);
        }
    }
    let axis_y = top + n_p as f64 * cell_h + 14.0;
    for (j, m) in start_minutes.iter().enumerate() {
        if j % 3 == 0 {
            let x = left + j as f64 * cell_w;
            let _ = writeln!(s, r#"<text x="{x}" y="{axis_y}">{:02}:{:02}</text>"#, (m % 1440) / 60, m % 60);
        }
    }
    let _ = writeln!(s, r#"<text x="{left}" y="{}">start time of day</text>"#, axis_y + 16.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})">relative request</text>"#,
        top + 60.0,
        top + 60.0
    );
    // Colour bar.
    let bar_x = left + cell_w * n_t as f64 + 20.0;
    let bar_h = cell_h * n_p as f64;
    for k in 0..20 {
        let y = top + bar_h * k as f64 / 20.0;
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x}" y="{y}" width="14" height="{}" fill="{}"/>"#,
            bar_h / 20.0 + 0.5,
            color(1.0 - k as f64 / 19.0)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{cap_steps}</text>"#, bar_x + 18.0, top + 8.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">0</text>"#, bar_x + 18.0, top + bar_h);
    s.push_str("</svg>\n");
    s
}

/// Predicted-vs-true scatter with the diagonal.
pub fn scatter(title: &str, points: &[(usize, usize)], cap_steps: usize) -> String {
    let size = 360.0;
    let (left, top) = (50.0, 30.0);
    let scale = size / cap_steps.max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="10">"#,
        left + size + 20.0,
        top + size + 40.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="18" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{size}" height="{size}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{top}" stroke="gray" stroke-dasharray="4"/>"#,
        top + size,
        left + size
    );
    for &(truth, pred) in points {
        let cx = left + truth as f64 * scale;
        let cy = top + size - pred as f64 * scale;
        let fill = if pred > truth { "crimson" } else { "steelblue" };
        let _ = writeln!(s, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="1.8" fill="{fill}" fill-opacity="0.6"/>"#);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">true steps</text>"#, left + size / 2.0 - 20.0, top + size + 28.0);
    let _ = writeln!(s, r#"<text x="12" y="{}" transform="rotate(-90 12 {})">predicted steps</text>"#, top + size / 2.0 + 30.0, top + size / 2.0 + 30.0);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_is_self_contained() {
        let svg = envelope_heatmap("a < b", &[-1.0, 0.0, 1.0], &[0, 60], &[vec![1, 2], vec![288, 288], vec![0, 5]], 288);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("href"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<title>").count(), 6);
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
    }

    #[test]
    fn scatter_marks_optimistic_points() {
        let svg = scatter("s", &[(10, 20), (20, 10)], 288);
        assert_eq!(svg.matches("crimson").count(), 1);
    }
}
