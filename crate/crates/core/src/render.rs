//! Top-down SVG rendering of a scene.

use std::fmt::Write as _;

use crate::geometry::Shape;
use crate::simworld::SceneState;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Half extent of the drawn area (m).
    pub view_halfwidth: f64,
    pub pixels_per_meter: f64,
    pub corridor_halfwidth: f64,
    /// Half extent of the sampling region, drawn dashed; `None` hides it.
    pub region_halfwidth: Option<f64>,
    pub labels: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            view_halfwidth: 0.34,
            pixels_per_meter: 1000.0,
            corridor_halfwidth: crate::simworld::DEFAULT_CORRIDOR_HALFWIDTH,
            region_halfwidth: Some(crate::scenegen::REGION_HALFWIDTH),
            labels: true,
        }
    }
}

fn esc(s: &str) -> String {
    let mut o = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => o.push_str("&amp;"),
            '<' => o.push_str("&lt;"),
            '>' => o.push_str("&gt;"),
            '"' => o.push_str("&quot;"),
            '\'' => o.push_str("&apos;"),
            c => o.push(c),
        }
    }
    o
}

struct Frame {
    half: f64,
    ppm: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        (x + self.half) * self.ppm
    }
    fn y(&self, y: f64) -> f64 {
        (self.half - y) * self.ppm
    }
    fn len(&self, l: f64) -> f64 {
        l * self.ppm
    }
}

fn part_outline(out: &mut String, f: &Frame, shape: &Shape, cx: f64, cy: f64, yaw: f64) {
    match *shape {
        Shape::Box { x, y, .. } => {
            let _ = write!(
                out,
                r#"<rect class="part" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" transform="rotate({:.3} {:.2} {:.2})"/>"#,
                f.x(cx) - f.len(x) / 2.0,
                f.y(cy) - f.len(y) / 2.0,
                f.len(x),
                f.len(y),
                -yaw.to_degrees(),
                f.x(cx),
                f.y(cy)
            );
        }
        Shape::Cylinder { radius, .. } | Shape::Sphere { radius } => {
            let _ = write!(
                out,
                r#"<circle class="part" cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#,
                f.x(cx),
                f.y(cy),
                f.len(radius)
            );
        }
    }
}

pub fn render_scene(scene: &SceneState, opts: &RenderOptions) -> String {
    let f = Frame {
        half: opts.view_halfwidth,
        ppm: opts.pixels_per_meter,
    };
    let size = f.len(2.0 * opts.view_halfwidth);
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="0 0 {size:.0} {size:.0}">"#
    );
    s.push_str(
        "<style>\
         .table{fill:#f4f1ea;stroke:#6b645a;stroke-width:2}\
         .region{fill:none;stroke:#b5ad9f;stroke-dasharray:6 4}\
         .corridor{fill:none;stroke:#c0392b;stroke-width:1.5;stroke-dasharray:4 3}\
         .footprint{fill:#8fa3b8;fill-opacity:.55;stroke:#34495e;stroke-width:1.5}\
         .footprint.target{fill:#e67e22;fill-opacity:.8;stroke:#a04000;stroke-width:2.5}\
         .footprint.escaped{stroke:#c0392b;stroke-dasharray:3 2}\
         .part{fill:none;stroke:#2c3e50;stroke-width:1}\
         .tcp{stroke:#16a085;stroke-width:2.5;fill:none}\
         text{font:11px sans-serif;fill:#222}\
         </style>",
    );
    let w = scene.workspace_halfwidth;
    let _ = write!(
        s,
        r#"<rect class="table" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
        f.x(-w),
        f.y(w),
        f.len(2.0 * w),
        f.len(2.0 * w)
    );
    if let Some(r) = opts.region_halfwidth {
        let _ = write!(
            s,
            r#"<rect class="region" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
            f.x(-r),
            f.y(r),
            f.len(2.0 * r),
            f.len(2.0 * r)
        );
    }
    let escaped = crate::simworld::escaped_objects(scene);
    for o in &scene.objects {
        let (x, y, yaw) = (o.pose.position.x, o.pose.position.y, o.pose.yaw);
        let mut class = String::from("footprint");
        if o.is_target {
            class.push_str(" target");
        }
        if escaped.contains(&o.id) {
            class.push_str(" escaped");
        }
        let _ = write!(s, r#"<g class="object" data-id="{}">"#, esc(&o.id));
        let _ = write!(
            s,
            r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#,
            f.x(x),
            f.y(y),
            f.len(o.footprint_radius)
        );
        let (c, sn) = (yaw.cos(), yaw.sin());
        for p in &o.body.parts {
            let px = x + c * p.offset.x - sn * p.offset.y;
            let py = y + sn * p.offset.x + c * p.offset.y;
            part_outline(&mut s, &f, &p.shape, px, py, yaw);
        }
        if opts.labels {
            let _ = write!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                f.x(x),
                f.y(y) - f.len(o.footprint_radius) - 3.0,
                esc(&o.id)
            );
        }
        s.push_str("</g>");
        if o.is_target {
            let _ = write!(
                s,
                r#"<circle class="corridor" cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#,
                f.x(x),
                f.y(y),
                f.len(o.footprint_radius + opts.corridor_halfwidth)
            );
        }
    }
    let t = &scene.hand.tcp;
    let (tx, ty) = (f.x(t.position.x), f.y(t.position.y));
    let arm = 10.0;
    let _ = write!(
        s,
        r#"<g class="tcp"><circle cx="{tx:.2}" cy="{ty:.2}" r="5"/><line x1="{tx:.2}" y1="{ty:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{:.2}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}"/></g>"#,
        tx + 2.0 * arm * t.yaw.cos(),
        ty - 2.0 * arm * t.yaw.sin(),
        tx - arm,
        tx + arm
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::handrig::HandRig;
    use crate::scenegen::{generate_scenario, load_scene, ObjectRoster};

    #[test]
    fn one_footprint_per_object_and_valid_xml() {
        let roster = ObjectRoster::default();
        let c = generate_scenario("mug", 3, 11, &roster).unwrap();
        let scene = load_scene(&c, &roster, &HandRig::default(), Pose::identity()).unwrap();
        let svg = render_scene(&scene, &RenderOptions::default());
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let footprints: Vec<_> = doc
            .descendants()
            .filter(|n| {
                n.attribute("class")
                    .is_some_and(|c| c.split(' ').any(|w| w == "footprint"))
            })
            .collect();
        assert_eq!(footprints.len(), scene.objects.len());
        let targets = footprints
            .iter()
            .filter(|n| n.attribute("class").unwrap().contains("target"))
            .count();
        assert_eq!(targets, 1);
        assert_eq!(
            doc.descendants()
                .filter(|n| n.attribute("class") == Some("tcp"))
                .count(),
            1
        );
        assert_eq!(
            doc.descendants()
                .filter(|n| n.attribute("class") == Some("corridor"))
                .count(),
            1
        );
    }

    #[test]
    fn escapes_markup_in_ids() {
        assert_eq!(esc("a<b>&\"c'"), "a&lt;b&gt;&amp;&quot;c&apos;");
    }
}
