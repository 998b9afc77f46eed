//! Minimal SVG line chart for third-order fits.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

/// Points `(log₂ n, y)` with the fitted line and a slope annotation.
pub fn fit_chart(title: &str, xs: &[f64], ys: &[f64], slope: f64, intercept: f64) -> String {
    let (x0, x1) = bounds(xs);
    let line: Vec<f64> = xs.iter().map(|x| slope * x + intercept).collect();
    let (y0, y1) = bounds(&[ys, &line[..]].concat());
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">log2 n</text>"#, W / 2.0, H - 14.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" transform="rotate(-90 16 {})" text-anchor="middle">ceil(log2 M) - nH - sigma sqrt(n) Qinv(eps)</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (&x, _) in xs.iter().zip(ys) {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{x:.0}</text>"#, px(x), H - PAD + 16.0);
    }
    for y in [y0, y1] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{y:.2}</text>"#, PAD - 6.0, py(y) + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-width="2"/>"#,
        px(x0),
        py(slope * x0 + intercept),
        px(x1),
        py(slope * x1 + intercept)
    );
    for (&x, &y) in xs.iter().zip(ys) {
        let _ = writeln!(s, r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, px(x), py(y));
    }
    let _ = writeln!(
        s,
        r#"<text class="slope" x="{}" y="{}" text-anchor="end" font-size="13">slope = {slope:.4}</text>"#,
        W - PAD,
        PAD - 8.0
    );
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-9 {
        (lo - 1.0, hi + 1.0)
    } else {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
