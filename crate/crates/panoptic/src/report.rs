//! Serialized forms of metric and loss reports.
//!
//! Floats are written by `serde_json` as shortest round-trip decimals, so the
//! same values always produce the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use panoptic_core::metrics::finalize;
use panoptic_core::{ClassKind, ClassTable, MetricAccumulator};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Serialize)]
struct ClassEntry<'a> {
    name: &'a str,
    kind: &'static str,
    pq: Option<f64>,
    pq_dagger: Option<f64>,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
}

#[derive(Debug, Serialize)]
struct EvaluationJson<'a> {
    images: usize,
    pq: Option<f64>,
    pq_dagger: Option<f64>,
    pq_stuff: Option<f64>,
    pq_things: Option<f64>,
    per_class: BTreeMap<u32, ClassEntry<'a>>,
    undefined_classes: Vec<u32>,
}

fn kind_name(kind: ClassKind) -> &'static str {
    match kind {
        ClassKind::Stuff => "stuff",
        ClassKind::Thing => "thing",
    }
}

/// Renders the finalized metrics of `acc`. Undefined scores are `null` in
/// JSON and `-` in text.
pub fn render_evaluation(acc: &MetricAccumulator, classes: &ClassTable, images: usize, format: Format) -> String {
    let r = finalize(acc);
    match format {
        Format::Json => {
            let doc = EvaluationJson {
                images,
                pq: r.pq,
                pq_dagger: r.pq_dagger,
                pq_stuff: r.pq_stuff,
                pq_things: r.pq_things,
                per_class: r
                    .per_class
                    .iter()
                    .map(|(&id, c)| {
                        let name = classes.get(id).map_or("", |i| i.name.as_str());
                        (
                            id,
                            ClassEntry {
                                name,
                                kind: kind_name(c.kind),
                                pq: c.pq,
                                pq_dagger: c.pq_dagger,
                                tp: c.tp,
                                fp: c.fp,
                                fn_: c.fn_,
                            },
                        )
                    })
                    .collect(),
                undefined_classes: r.undefined_classes.clone(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Text => {
            let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v));
            let mut s = String::new();
            writeln!(s, "images     {images}").unwrap();
            writeln!(s, "PQ         {}", pct(r.pq)).unwrap();
            writeln!(s, "PQ-dagger  {}", pct(r.pq_dagger)).unwrap();
            writeln!(s, "PQ-stuff   {}", pct(r.pq_stuff)).unwrap();
            writeln!(s, "PQ-things  {}", pct(r.pq_things)).unwrap();
            writeln!(s).unwrap();
            writeln!(s, "{:>6}  {:<20} {:<5} {:>7} {:>9} {:>6} {:>6} {:>6}", "id", "name", "kind", "PQ", "PQ-dagger", "TP", "FP", "FN").unwrap();
            for (&id, c) in &r.per_class {
                let name = classes.get(id).map_or("", |i| i.name.as_str());
                writeln!(
                    s,
                    "{:>6}  {:<20} {:<5} {:>7} {:>9} {:>6} {:>6} {:>6}",
                    id,
                    name,
                    kind_name(c.kind),
                    pct(c.pq),
                    pct(c.pq_dagger),
                    c.tp,
                    c.fp,
                    c.fn_
                )
                .unwrap();
            }
            s
        }
    }
}
