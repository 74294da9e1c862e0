use std::fmt::Write as _;

use super::trial::TrialOutcome;

const PX_PER_M: f64 = 40.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Top-down plot of a trial: obstacles, ground-truth objects, the final
/// best-particle landmarks and the robot path.
pub fn trajectory_svg(t: &TrialOutcome) -> String {
    let extent = t
        .objects
        .iter()
        .map(|o| o.pose)
        .chain(t.path.iter().copied())
        .fold((1.0f64, 1.0f64), |(w, h), p| (w.max(p.x + 1.0), h.max(p.y + 1.0)));
    let (w, h) = (extent.0 * PX_PER_M, extent.1 * PX_PER_M);
    // y grows upward in the world, downward in SVG.
    let px = |x: f64, y: f64| (x * PX_PER_M, h - y * PX_PER_M);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, "<title>{}</title>", xml_escape(&t.metrics.label())).unwrap();
    for o in &t.objects {
        let (x, y) = px(o.pose.x, o.pose.y);
        let fill = if o.container.is_some() { "orange" } else { "gray" };
        writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="8" height="8" fill="{fill}"><title>{}</title></rect>"#,
            x - 4.0,
            y - 4.0,
            xml_escape(&o.id)
        )
        .unwrap();
    }
    for n in t.final_map.graph.landmarks() {
        let (x, y) = px(n.pose.x, n.pose.y);
        let p = t.final_map.existence.get(&n.id).copied().unwrap_or(0.0);
        let stroke = if n.hypothesized { "purple" } else { "green" };
        writeln!(
            s,
            r#"<circle cx="{x:.1}" cy="{y:.1}" r="6" fill="none" stroke="{stroke}" stroke-opacity="{:.2}"><title>{} {} p={p:.2}</title></circle>"#,
            0.2 + 0.8 * p,
            n.id,
            xml_escape(&n.name)
        )
        .unwrap();
    }
    if !t.path.is_empty() {
        let pts: Vec<String> = t
            .path
            .iter()
            .map(|p| {
                let (x, y) = px(p.x, p.y);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="blue" stroke-width="2"/>"#,
            pts.join(" ")
        )
        .unwrap();
        let (x, y) = px(t.path[0].x, t.path[0].y);
        writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="blue"/>"#).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
