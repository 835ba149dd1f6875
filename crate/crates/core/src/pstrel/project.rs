use rayon::prelude::*;
use serde::Serialize;

use super::{Polarity, PstrelError, Template};
use crate::strel::Monitor;

/// Tightest valuation of `template` at one location, found by bisecting each
/// parameter in priority order. Parameters already fixed keep their final
/// value; later ones stay at their permissive bound. Robustness `>= 0` counts
/// as satisfied.
pub fn project_lex(template: &Template, monitor: &Monitor, location: usize) -> Result<Vec<f64>, PstrelError> {
    let holds = |values: &[f64]| -> Result<bool, PstrelError> {
        let f = template.instantiate(values)?;
        Ok(monitor.robustness(&f, location, 0)? >= 0.0)
    };
    let mut values = template.permissive_corner();
    if !holds(&values)? {
        let id = monitor.model().location(location).id.clone();
        return Err(PstrelError::Unprojectable(id));
    }
    for (i, param) in template.params().iter().enumerate() {
        let (mut lo, mut hi) = (param.lo, param.hi);
        while hi - lo >= param.delta {
            let mid = lo + (hi - lo) / 2.0;
            values[i] = mid;
            let ok = holds(&values)?;
            match (param.polarity, ok) {
                (Polarity::Positive, true) | (Polarity::Negative, false) => hi = mid,
                (Polarity::Positive, false) | (Polarity::Negative, true) => lo = mid,
            }
        }
        values[i] = match param.polarity {
            Polarity::Positive => hi,
            Polarity::Negative => lo,
        };
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionRow {
    pub location_id: String,
    /// `None` when the location is unprojectable.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSet {
    pub params: Vec<String>,
    pub rows: Vec<ProjectionRow>,
}

impl ProjectionSet {
    pub fn projected(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.rows.iter().filter_map(|r| r.values.as_deref().map(|v| (r.location_id.as_str(), v)))
    }

    pub fn unprojectable(&self) -> Vec<&str> {
        self.rows.iter().filter(|r| r.values.is_none()).map(|r| r.location_id.as_str()).collect()
    }

    /// CSV with one column per parameter and a trailing status column.
    pub fn write_csv(&self, writer: impl std::io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["location_id".to_string()];
        header.extend(self.params.iter().cloned());
        header.push("status".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.location_id.clone()];
            match &row.values {
                Some(values) => {
                    record.extend(values.iter().map(|v| v.to_string()));
                    record.push("ok".into());
                }
                None => {
                    record.extend(self.params.iter().map(|_| String::new()));
                    record.push("unprojectable".into());
                }
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Project every location in parallel. Unprojectable locations are recorded;
/// any other failure aborts.
pub fn project_all(template: &Template, monitor: &Monitor) -> Result<ProjectionSet, PstrelError> {
    let rows = (0..monitor.model().len())
        .into_par_iter()
        .map(|loc| {
            let location_id = monitor.model().location(loc).id.clone();
            match project_lex(template, monitor, loc) {
                Ok(values) => Ok(ProjectionRow { location_id, values: Some(values) }),
                Err(PstrelError::Unprojectable(_)) => Ok(ProjectionRow { location_id, values: None }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProjectionSet { params: template.param_names().into_iter().map(String::from).collect(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pstrel::{ParamSpec, TemplateSpec};
    use crate::spatial::{Location, SpatialModel};
    use crate::trace::SpatioTemporalTrace;

    fn single(xs: &[f64]) -> (SpatialModel, SpatioTemporalTrace) {
        let model = SpatialModel::isolated(vec![Location::new("a", 0.0, 0.0)]).unwrap();
        let values = vec![xs.iter().map(|&x| vec![x]).collect()];
        let trace = SpatioTemporalTrace::new(vec!["x".into()], vec!["a".into()], 0.0, 1.0, values).unwrap();
        (model, trace)
    }

    #[test]
    fn first_positive_sample() {
        let mut xs = vec![-1.0; 12];
        xs[7] = 2.0;
        let (model, trace) = single(&xs);
        let spec = TemplateSpec::new("F[0,$tau] x > 0", vec![ParamSpec::named("tau").with_delta(0.01)]);
        let t = spec.resolve(&model, &trace).unwrap();
        let m = Monitor::new(&model, &trace).unwrap();
        let v = project_lex(&t, &m, 0).unwrap();
        assert!((v[0] - 7.0).abs() < 0.01, "{v:?}");
        assert!(v[0] >= 7.0);
    }

    #[test]
    fn irrelevant_parameter_collapses_to_easy_bound() {
        let (model, trace) = single(&[1.0, 1.0, 1.0]);
        let spec = TemplateSpec::new("F[0,$tau] x > 0", vec![]);
        let t = spec.resolve(&model, &trace).unwrap();
        let m = Monitor::new(&model, &trace).unwrap();
        let v = project_lex(&t, &m, 0).unwrap();
        assert!(v[0] - t.params()[0].lo < t.params()[0].delta);
    }

    #[test]
    fn magnitude_projection_and_failures() {
        let (model, trace) = single(&[3.0, 1.0, 4.0]);
        let spec = TemplateSpec::new("G[0,1] x > $c", vec![ParamSpec::named("c").with_bounds(0.0, 10.0).with_delta(0.001)]);
        let t = spec.resolve(&model, &trace).unwrap();
        let m = Monitor::new(&model, &trace).unwrap();
        let v = project_lex(&t, &m, 0).unwrap();
        assert!((v[0] - 1.0).abs() <= 0.001 && v[0] <= 1.0, "{v:?}");

        let spec = TemplateSpec::new("G[0,1] x > $c", vec![ParamSpec::named("c").with_bounds(2.0, 10.0)]);
        let t = spec.resolve(&model, &trace).unwrap();
        assert!(matches!(project_lex(&t, &m, 0), Err(PstrelError::Unprojectable(id)) if id == "a"));
        let set = project_all(&t, &m).unwrap();
        assert_eq!(set.unprojectable(), vec!["a"]);
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "location_id,c,status\na,,unprojectable\n");
    }
}
