use adlsense_core::radar::{render_radar, Colour, RadarSeries, RadarSpec};
use adlsense_core::risk::RiskFactor;
use proptest::prelude::*;

fn vertices(points: &str) -> Vec<(f64, f64)> {
    points
        .split_whitespace()
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn score() -> impl Strategy<Value = Option<f64>> {
    prop::option::weighted(0.9, 0.0f64..=1.0)
}

proptest! {
    #[test]
    fn vertices_sit_at_score_radius(
        a in prop::array::uniform6(score()),
        b in prop::array::uniform6(score()),
        size in 320u32..1200,
    ) {
        let mut spec = RadarSpec::new(vec![
            RadarSeries { label: "resident <1>".into(), scores: a, colour: Colour::Resident, fill_opacity: 0.3 },
            RadarSeries { label: "template".into(), scores: b, colour: Colour::Risky, fill_opacity: 0.1 },
        ]);
        spec.size_px = size;
        let svg = render_radar(&spec).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let (cx, cy) = spec.center();
        let r = spec.radius();

        let axes: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("axis")).collect();
        prop_assert_eq!(axes.len(), 6);
        let labels: Vec<String> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("axis-label"))
            .map(|n| n.text().unwrap().to_string())
            .collect();
        prop_assert_eq!(labels, RiskFactor::ALL.iter().map(|f| f.label().to_string()).collect::<Vec<_>>());

        for poly in doc.descendants().filter(|n| n.attribute("class") == Some("series")) {
            let order: usize = poly.attribute("data-series").unwrap().parse().unwrap();
            let scores = spec.series[order].scores;
            let pts = vertices(poly.attribute("points").unwrap());
            prop_assert_eq!(pts.len(), 6);
            for (i, (x, y)) in pts.into_iter().enumerate() {
                let want = scores[i].unwrap_or(0.0) * r;
                prop_assert!(((x - cx).hypot(y - cy) - want).abs() <= 0.5);
                let angle = (-90.0 + 60.0 * i as f64).to_radians();
                if want > 1.0 {
                    prop_assert!(((y - cy).atan2(x - cx) - angle).sin().abs() < 0.01);
                }
            }
        }
    }
}
