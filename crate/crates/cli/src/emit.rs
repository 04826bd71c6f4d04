use std::io;
use std::path::Path;

use fpcascade::analysis::{field_distance, slice_mass, slice_moments, Metric};
use fpcascade::model::Tolerances;
use fpcascade::{DensityField, ValidatedConfig};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

use crate::run::{Results, COLUMNS};
use crate::Failure;

/// Floats as `d.dddddddddddddddde±x`: 17 significant digits, the same on every platform.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn columns(r: &Results) -> impl Iterator<Item = (&'static str, &DensityField)> {
    COLUMNS
        .iter()
        .zip(&r.columns)
        .filter_map(|(name, c)| c.as_ref().map(|w| (*name, w)))
}

/// Every populated slice of every column must be finite, non-negative within
/// the undershoot tolerance, and carry unit mass.
pub fn check(r: &Results, tol: &Tolerances) -> Result<(), Failure> {
    for (name, w) in columns(r) {
        for j in w.populated_slices() {
            let slice = w.slice(j).unwrap();
            if let Some((i, v)) = slice
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_finite() || **v < -tol.undershoot)
            {
                return Err(Failure::Emission(format!("{name}: value {v:e} at slice {j}, node {i}")));
            }
            let mass = slice_mass(w, j).map_err(|e| Failure::Emission(e.to_string()))?;
            if (mass - 1.0).abs() > tol.emission_mass {
                return Err(Failure::Emission(format!(
                    "{name}: slice {j} has mass {mass} (tolerance {:e})",
                    tol.emission_mass
                )));
            }
        }
    }
    Ok(())
}

pub fn write(r: &Results, v: &ValidatedConfig) -> Result<(), Failure> {
    let dir = Path::new(&v.config.output.dir);
    let io_err = |e: io::Error| Failure::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io_err)?;
    std::fs::write(dir.join("density.csv"), density_csv(r, v).map_err(io_err)?).map_err(io_err)?;
    std::fs::write(dir.join("summary.json"), summary_json(r, v).map_err(io_err)?).map_err(io_err)?;
    Ok(())
}

fn density_csv(r: &Results, v: &ValidatedConfig) -> io::Result<Vec<u8>> {
    let grid = &v.grid;
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["x", "t"];
    header.extend(COLUMNS);
    out.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for j in 0..grid.nt() {
        let t = fmt(grid.t(j));
        for i in 0..grid.nx() {
            record.clear();
            record.push(fmt(grid.x(i)));
            record.push(t.clone());
            for column in &r.columns {
                record.push(
                    column
                        .as_ref()
                        .and_then(|w| w.value(j, i))
                        .map_or_else(String::new, fmt),
                );
            }
            out.write_record(&record)?;
        }
    }
    out.into_inner().map_err(|e| e.into_error())
}

fn summary(r: &Results, v: &ValidatedConfig) -> Value {
    let checkpoints = &v.checkpoint_slices;

    let mut masses = Map::new();
    let mut moments = Map::new();
    for (name, w) in columns(r) {
        let per_slice: Vec<Value> = (0..v.grid.nt())
            .map(|j| slice_mass(w, j).map_or(Value::Null, Value::from))
            .collect();
        masses.insert(name.into(), per_slice.into());
        let at_checkpoints: Vec<Value> = checkpoints
            .iter()
            .map(|&j| match slice_moments(w, j) {
                Ok((mean, variance)) => json!({ "t": v.grid.t(j), "mean": mean, "variance": variance }),
                Err(_) => Value::Null,
            })
            .collect();
        moments.insert(name.into(), at_checkpoints.into());
    }
    let samples: Vec<Value> = (0..checkpoints.len())
        .map(|k| {
            let (mean, variance) = r.ensemble.moments(k);
            json!({ "t": r.ensemble.times[k], "mean": mean, "variance": variance })
        })
        .collect();
    moments.insert("samples".into(), samples.into());

    let present: Vec<_> = columns(r).collect();
    let mut distances = Map::new();
    for (k, (a_name, a)) in present.iter().enumerate() {
        for (b_name, b) in &present[k + 1..] {
            let mut per_metric = Map::new();
            for metric in Metric::ALL {
                let all = field_distance(a, b, metric).expect("columns share the grid");
                let worst = all
                    .iter()
                    .flatten()
                    .copied()
                    .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
                let at: Vec<Value> = checkpoints
                    .iter()
                    .map(|&j| all[j].map_or(Value::Null, Value::from))
                    .collect();
                per_metric.insert(metric.name().into(), json!({ "checkpoints": at, "max": worst }));
            }
            distances.insert(format!("{a_name}:{b_name}"), per_metric.into());
        }
    }

    let (scaling_fit, resummation_gaps) = match &r.scaling {
        Some(s) => (
            json!({ "t": s.t, "lambdas": s.lambdas, "errors": s.errors, "slope": s.slope }),
            json!({ "t": s.t, "lambdas": s.lambdas, "gaps": s.gaps }),
        ),
        None => (Value::Null, Value::Null),
    };

    json!({
        "config": v.config,
        "checkpoints": v.checkpoint_times(),
        "masses": masses,
        "moments": moments,
        "distances": distances,
        "translation_residual": r.translation_residual,
        "scaling_fit": scaling_fit,
        "resummation_gaps": resummation_gaps,
    })
}

fn summary_json(r: &Results, v: &ValidatedConfig) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats::default());
    summary(r, v).serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// Pretty-printed JSON with floats written by [`fmt`].
#[derive(Default)]
struct FixedFloats(PrettyFormatter<'static>);

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt(value).as_bytes())
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}
