//! Score scatter plot: first dimension horizontal, second vertical (zero
//! for rank-one fits). Rows are squares, columns diamonds.

use std::fmt::Write;

use rcassoc::FitResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const MARK: f64 = 5.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn point(scores: &[f64]) -> (f64, f64) {
    (scores[0], scores.get(1).copied().unwrap_or(0.0))
}

pub fn scores_svg(res: &FitResult, row_labels: &[String], col_labels: &[String]) -> String {
    let rows: Vec<(f64, f64)> = res.params.mu.iter().map(|m| point(m)).collect();
    let cols: Vec<(f64, f64)> = res.params.nu.iter().map(|m| point(m)).collect();
    let all = rows.iter().chain(&cols);
    let xr = all.clone().map(|p| p.0.abs()).fold(0.0, f64::max).max(1e-9) * 1.15;
    let yr = all.map(|p| p.1.abs()).fold(0.0, f64::max).max(xr * 0.25) * 1.15;
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let scale = (pw / (2.0 * xr)).min(ph / (2.0 * yr));
    let (ox, oy) = (LEFT + pw / 2.0, TOP + ph / 2.0);
    let sx = |x: f64| ox + x * scale;
    let sy = |y: f64| oy - y * scale;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let spec = &res.spec.interaction;
    let _ = writeln!(
        s,
        r#"<title>Row and column scores: rank {}, row logit {}, column logit {}, lambda {}</title>"#,
        res.spec.k, spec.row_type, spec.col_type, spec.lambda
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<g stroke="#888" stroke-width="1"><line x1="{:.2}" y1="{oy:.2}" x2="{:.2}" y2="{oy:.2}"/><line x1="{ox:.2}" y1="{:.2}" x2="{ox:.2}" y2="{:.2}"/></g>"##,
        LEFT,
        WIDTH - RIGHT,
        TOP,
        HEIGHT - BOTTOM
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle">dimension 1</text>"#,
        ox,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{oy:.2}" font-family="sans-serif" font-size="14" text-anchor="middle" transform="rotate(-90 20 {oy:.2})">dimension 2</text>"#
    );
    let phi: Vec<String> = res.params.phi.iter().map(|p| format!("{p:.3}")).collect();
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="28" font-family="sans-serif" font-size="14" text-anchor="middle">phi = {}</text>"#,
        WIDTH / 2.0,
        phi.join(", ")
    );

    let _ = writeln!(s, r##"<g id="rows" fill="#1f4e9c">"##);
    for ((x, y), label) in rows.iter().zip(row_labels) {
        let (px, py) = (sx(*x), sy(*y));
        let _ = writeln!(
            s,
            r#"<rect class="row" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
            px - MARK,
            py - MARK,
            2.0 * MARK,
            2.0 * MARK
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            px + 1.6 * MARK,
            py - 1.6 * MARK,
            escape(label)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="columns" fill="#b3261e">"##);
    for ((x, y), label) in cols.iter().zip(col_labels) {
        let (px, py) = (sx(*x), sy(*y));
        let d = 1.4 * MARK;
        let _ = writeln!(
            s,
            r#"<polygon class="column" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}"/>"#,
            px,
            py - d,
            px + d,
            py,
            px,
            py + d,
            px - d,
            py
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            px + 1.6 * MARK,
            py + 3.2 * MARK,
            escape(label)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rcassoc::rc_model::fit;
    use rcassoc::{fixtures, FitOptions, InteractionSpec, LogitType, ModelSpec};

    fn labels(t: &rcassoc::ContingencyTable) -> (Vec<String>, Vec<String>) {
        (t.row_labels().to_vec(), t.col_labels().to_vec())
    }

    #[test]
    fn one_marker_per_category() {
        let t = fixtures::table6();
        let spec = ModelSpec::new(2, InteractionSpec::new(LogitType::C, LogitType::L, -0.06).unwrap());
        let res = fit(&t, &spec, &FitOptions::default()).unwrap();
        let (r, c) = labels(&t);
        let svg = scores_svg(&res, &r, &c);
        assert_eq!(svg.matches(r#"class="row""#).count(), 5);
        assert_eq!(svg.matches(r#"class="column""#).count(), 4);
        assert!(svg.contains(">dimension 1<") && svg.contains(">dimension 2<"));
    }

    #[test]
    fn rank_one_sits_on_axis() {
        let t = fixtures::table7();
        let res = fit(&t, &ModelSpec::new(1, InteractionSpec::log_linear()), &FitOptions::default()).unwrap();
        let (r, c) = labels(&t);
        let svg = scores_svg(&res, &r, &c);
        let oy = TOP + (HEIGHT - TOP - BOTTOM) / 2.0;
        let want = format!(r#"y="{:.2}""#, oy - MARK);
        assert_eq!(svg.matches(&want).count(), 4);
    }
}
