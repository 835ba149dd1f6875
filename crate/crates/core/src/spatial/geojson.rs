use serde_json::{json, Value};

use super::SpatialModel;

/// FeatureCollection with one Point per location and one LineString per
/// undirected edge (directed models emit one per directed edge).
///
/// `labels`, when given, is indexed like the model's locations and becomes a
/// `cluster` property on the points.
pub fn to_geojson(model: &SpatialModel, labels: Option<&[Option<usize>]>) -> Value {
    let mut features = Vec::with_capacity(model.len() + model.directed_edge_count());
    for (i, l) in model.locations().iter().enumerate() {
        let mut props = json!({ "id": l.id, "index": i });
        if let Some(name) = &l.name {
            props["name"] = json!(name);
        }
        if let Some(label) = labels.and_then(|ls| ls.get(i).copied().flatten()) {
            props["cluster"] = json!(label);
        }
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [l.lon, l.lat] },
            "properties": props,
        }));
    }
    for e in model.edges() {
        if model.is_symmetric() && e.source > e.target {
            continue;
        }
        let (a, b) = (model.location(e.source), model.location(e.target));
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "LineString", "coordinates": [[a.lon, a.lat], [b.lon, b.lat]] },
            "properties": { "source": a.id, "target": b.id, "weight_m": e.weight },
        }));
    }
    json!({ "type": "FeatureCollection", "features": features })
}
