use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Location, SpatialError};

#[derive(Debug, Serialize, Deserialize)]
struct LocationRow {
    id: String,
    lat: f64,
    lon: f64,
    #[serde(default)]
    name: Option<String>,
}

/// Read a locations CSV with header `id,lat,lon[,name]`.
pub fn read_locations(path: impl AsRef<Path>) -> Result<Vec<Location>, SpatialError> {
    read_locations_from(std::fs::File::open(path)?)
}

pub fn read_locations_from(reader: impl Read) -> Result<Vec<Location>, SpatialError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<LocationRow>() {
        let row = row?;
        let location = Location {
            id: row.id,
            lat: row.lat,
            lon: row.lon,
            name: row.name.filter(|n| !n.is_empty()),
        };
        location.validate()?;
        out.push(location);
    }
    Ok(out)
}

pub fn write_locations(writer: impl Write, locations: &[Location]) -> Result<(), SpatialError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "lat", "lon", "name"])?;
    for l in locations {
        wtr.write_record([
            l.id.clone(),
            l.lat.to_string(),
            l.lon.to_string(),
            l.name.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
