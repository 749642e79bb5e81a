//! Minimal SVG charts over sweep rows. Display only; the CSV is the record.

use std::fmt::Write;

use crate::config::Method;
use crate::sweep::SweepRow;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Line chart of criterion against the varying threshold when one axis is
/// fixed, otherwise one heat grid per method.
pub fn render(rows: &[SweepRow], methods: &[Method]) -> String {
    let coords: Vec<Vec<f64>> = rows.iter().map(|r| r.region.thresholds()).collect();
    let distinct = |i: usize| {
        let mut v: Vec<f64> = coords.iter().map(|c| c[i]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let dim = coords.first().map_or(1, Vec::len);
    if dim == 1 {
        return lines(rows, methods, 0, "r");
    }
    let (rv, rc) = (distinct(0), distinct(1));
    match (rv.len(), rc.len()) {
        (1, _) => lines(rows, methods, 1, "r_c"),
        (_, 1) => lines(rows, methods, 0, "r_v"),
        _ => heat(rows, methods, &rv, &rc),
    }
}

fn lines(rows: &[SweepRow], methods: &[Method], axis: usize, label: &str) -> String {
    let xs: Vec<f64> = rows.iter().map(|r| r.region.thresholds()[axis]).collect();
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = |x: f64| PAD + (x - lo) / span * (W - 2.0 * PAD);
    let py = |p: f64| H - PAD - p * (H - 2.0 * PAD);

    let mut s = header();
    let _ = write!(
        s,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#, W / 2.0, H - 12.0);
    let _ = write!(s, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">criterion</text>"#, H / 2.0, H / 2.0);
    for (x, t) in [(lo, lo), (hi, hi)] {
        let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{t}</text>"#, px(x), H - PAD + 16.0);
    }
    for p in [0.0, 0.5, 1.0] {
        let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{p}</text>"#, PAD - 4.0, py(p) + 4.0);
    }
    for (i, m) in methods.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = rows
            .iter()
            .filter(|r| r.method == *m)
            .filter_map(|r| r.criterion.map(|c| format!("{:.2},{:.2}", px(r.region.thresholds()[axis]), py(c))))
            .collect();
        let _ = write!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = PAD + 16.0 * i as f64;
        let _ = write!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-size="12">{}</text>"#,
            W - PAD - 90.0,
            ly - 9.0,
            W - PAD - 75.0,
            ly,
            m.name()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn heat(rows: &[SweepRow], methods: &[Method], rv: &[f64], rc: &[f64]) -> String {
    let panel = (W - PAD) / methods.len().max(1) as f64;
    let cw = (panel - 20.0) / rc.len() as f64;
    let ch = (H - 2.0 * PAD) / rv.len() as f64;
    let mut s = header();
    for (i, m) in methods.iter().enumerate() {
        let x0 = PAD / 2.0 + panel * i as f64;
        let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, x0 + panel / 2.0, PAD - 10.0, m.name());
        for r in rows.iter().filter(|r| r.method == *m) {
            let t = r.region.thresholds();
            let a = rv.iter().position(|&v| v == t[0]).unwrap_or(0);
            let b = rc.iter().position(|&v| v == t[1]).unwrap_or(0);
            let fill = match r.criterion {
                Some(p) => {
                    let v = (255.0 * (1.0 - p.clamp(0.0, 1.0))) as u8;
                    format!("rgb({v},{v},255)")
                }
                None => "#cccccc".into(),
            };
            let _ = write!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                x0 + cw * b as f64,
                H - PAD - ch * (a + 1) as f64,
                cw,
                ch
            );
        }
    }
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">r_c (columns), r_v (rows, upwards)</text>"#, W / 2.0, H - 16.0);
    s.push_str("</svg>\n");
    s
}

fn header() -> String {
    format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif">"#)
}

#[cfg(test)]
mod tests {
    use super::*;
    use succmax_core::SuccessRegion;

    fn row(region: SuccessRegion<f64>, method: Method, c: Option<f64>) -> SweepRow {
        SweepRow { region, method, criterion: c, stalled: false, wall_time_ms: 0.0, psi: None, error: None }
    }

    #[test]
    fn line_chart_has_one_polyline_per_method() {
        let rows = vec![
            row(SuccessRegion::value_above(0.0), Method::Spm, Some(0.9)),
            row(SuccessRegion::value_above(0.0), Method::Greedy1d, Some(0.8)),
            row(SuccessRegion::value_above(1.0), Method::Spm, Some(0.5)),
            row(SuccessRegion::value_above(1.0), Method::Greedy1d, None),
        ];
        let svg = render(&rows, &[Method::Spm, Method::Greedy1d]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn full_grid_is_a_heat_map() {
        let rows: Vec<SweepRow> = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
            .iter()
            .map(|&(v, c)| row(SuccessRegion::value_above_cost_below(v, c), Method::Spm, Some(0.3)))
            .collect();
        let svg = render(&rows, &[Method::Spm]);
        assert_eq!(svg.matches("<rect").count(), 4);
    }
}
