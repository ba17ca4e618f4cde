//! JSON forms:
//!
//! ```text
//! measure:   {"d": 1, "atoms": [{"x": [0.5], "w": 1.0}]}
//! coupling:  {"d": 1, "atoms": [{"x": [0.5], "y": [1.0], "w": 1.0}]}
//! partition: {"d": 1, "cells": [{"kind": "interval", "a": null, "b": 0.0,
//!                                "a_closed": false, "b_closed": true}, ...]}
//! ```
//!
//! Unknown fields are rejected. Infinite bounds are written as `null`.

use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BoxCell, Cell, DiscreteCoupling, DiscreteMeasure, Partition, Point};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureJson {
    d: usize,
    atoms: Vec<AtomJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomJson {
    x: Vec<f64>,
    w: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingJson {
    d: usize,
    atoms: Vec<CouplingAtomJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingAtomJson {
    x: Vec<f64>,
    y: Vec<f64>,
    w: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionJson {
    d: usize,
    cells: Vec<CellJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum CellJson {
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
        lower_closed: Vec<bool>,
        upper_closed: Vec<bool>,
    },
    Interval {
        a: Option<f64>,
        b: Option<f64>,
        a_closed: bool,
        b_closed: bool,
    },
    Voronoi {
        site: usize,
        sites: Vec<Vec<f64>>,
    },
    Remainder {},
}

fn point_of<E: serde::de::Error>(d: usize, coords: &[f64]) -> Result<Point, E> {
    if coords.len() != d {
        return Err(E::custom(format!("point {coords:?} does not have dimension {d}")));
    }
    Point::new(coords).map_err(E::custom)
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Point::new(&v).map_err(D::Error::custom)
    }
}

impl Serialize for DiscreteMeasure {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MeasureJson {
            d: self.dim(),
            atoms: self
                .atoms()
                .iter()
                .map(|a| AtomJson { x: a.point.coords().to_vec(), w: a.weight })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = MeasureJson::deserialize(d)?;
        let atoms = raw
            .atoms
            .iter()
            .map(|a| Ok((point_of(raw.d, &a.x)?, a.w)))
            .collect::<Result<Vec<_>, D::Error>>()?;
        DiscreteMeasure::new(raw.d, atoms).map_err(D::Error::custom)
    }
}

impl Serialize for DiscreteCoupling {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CouplingJson {
            d: self.dim(),
            atoms: self
                .atoms()
                .iter()
                .map(|a| CouplingAtomJson { x: a.x.coords().to_vec(), y: a.y.coords().to_vec(), w: a.weight })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteCoupling {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = CouplingJson::deserialize(d)?;
        let atoms = raw
            .atoms
            .iter()
            .map(|a| Ok((point_of(raw.d, &a.x)?, point_of(raw.d, &a.y)?, a.w)))
            .collect::<Result<Vec<_>, D::Error>>()?;
        DiscreteCoupling::new(raw.d, atoms).map_err(D::Error::custom)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let cells = self
            .cells()
            .iter()
            .map(|c| match c {
                Cell::Box(b) => CellJson::Box {
                    lower: b.lower().iter().map(|v| finite_or_null(*v)).collect(),
                    upper: b.upper().iter().map(|v| finite_or_null(*v)).collect(),
                    lower_closed: b.lower_closed().to_vec(),
                    upper_closed: b.upper_closed().to_vec(),
                },
                Cell::Interval { a, b, a_closed, b_closed } => CellJson::Interval {
                    a: finite_or_null(*a),
                    b: finite_or_null(*b),
                    a_closed: *a_closed,
                    b_closed: *b_closed,
                },
                Cell::Voronoi { site, sites } => CellJson::Voronoi {
                    site: *site,
                    sites: sites.iter().map(|p| p.coords().to_vec()).collect(),
                },
                Cell::Remainder => CellJson::Remainder {},
            })
            .collect();
        PartitionJson { d: self.dim(), cells }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = PartitionJson::deserialize(d)?;
        let mut shared: Option<Arc<[Point]>> = None;
        let mut cells = Vec::with_capacity(raw.cells.len());
        for c in raw.cells {
            cells.push(match c {
                CellJson::Box { lower, upper, lower_closed, upper_closed } => {
                    let lo: Vec<f64> = lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect();
                    let hi: Vec<f64> = upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect();
                    Cell::Box(BoxCell::new(&lo, &hi, &lower_closed, &upper_closed).map_err(D::Error::custom)?)
                }
                CellJson::Interval { a, b, a_closed, b_closed } => Cell::Interval {
                    a: a.unwrap_or(f64::NEG_INFINITY),
                    b: b.unwrap_or(f64::INFINITY),
                    a_closed,
                    b_closed,
                },
                CellJson::Voronoi { site, sites } => {
                    let pts = sites
                        .iter()
                        .map(|s| point_of(raw.d, s))
                        .collect::<Result<Vec<_>, D::Error>>()?;
                    // Cells listing the same sites share one allocation.
                    let arc = match &shared {
                        Some(a) if a[..] == pts[..] => a.clone(),
                        _ => {
                            let a: Arc<[Point]> = pts.into();
                            shared = Some(a.clone());
                            a
                        }
                    };
                    Cell::Voronoi { site, sites: arc }
                }
                CellJson::Remainder {} => Cell::Remainder,
            });
        }
        Partition::new(raw.d, cells).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_round_trip_and_schema() {
        let m = DiscreteMeasure::on_line(&[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"d":1,"atoms":[{"x":[-1.0],"w":0.25},{"x":[0.0],"w":0.5},{"x":[1.0],"w":0.25}]}"#);
        let back: DiscreteMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn extra_fields_and_bad_dims_rejected() {
        let extra = r#"{"d":1,"atoms":[{"x":[0.0],"w":1.0,"z":3}]}"#;
        assert!(serde_json::from_str::<DiscreteMeasure>(extra).is_err());
        let extra_top = r#"{"d":1,"atoms":[{"x":[0.0],"w":1.0}],"name":"m"}"#;
        assert!(serde_json::from_str::<DiscreteMeasure>(extra_top).is_err());
        let bad_dim = r#"{"d":2,"atoms":[{"x":[0.0],"w":1.0}]}"#;
        assert!(serde_json::from_str::<DiscreteMeasure>(bad_dim).is_err());
        let bad_mass = r#"{"d":1,"atoms":[{"x":[0.0],"w":0.9}]}"#;
        assert!(serde_json::from_str::<DiscreteMeasure>(bad_mass).is_err());
    }

    #[test]
    fn coupling_schema() {
        let s = r#"{"d":1,"atoms":[{"x":[0.0],"y":[-1.0],"w":0.5},{"x":[0.0],"y":[1.0],"w":0.5}]}"#;
        let c: DiscreteCoupling = serde_json::from_str(s).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(serde_json::to_string(&c).unwrap(), s);
    }

    #[test]
    fn partition_round_trip() {
        let sites: Arc<[Point]> = vec![Point::scalar(-1.0), Point::scalar(1.0)].into();
        let parts = [
            Partition::new(
                1,
                vec![Cell::left_open(f64::NEG_INFINITY, 0.0), Cell::left_open(0.0, 1.0), Cell::Remainder],
            )
            .unwrap(),
            Partition::new(
                1,
                vec![Cell::Voronoi { site: 0, sites: sites.clone() }, Cell::Voronoi { site: 1, sites }],
            )
            .unwrap(),
            Partition::new(
                2,
                vec![
                    Cell::Box(BoxCell::half_open(&[0.0, 0.0], &[1.0, f64::INFINITY]).unwrap()),
                    Cell::Remainder,
                ],
            )
            .unwrap(),
        ];
        for p in parts {
            let s = serde_json::to_string(&p).unwrap();
            let back: Partition = serde_json::from_str(&s).unwrap();
            assert_eq!(back, p, "{s}");
        }
    }

    #[test]
    fn partition_unknown_kind_rejected() {
        let s = r#"{"d":1,"cells":[{"kind":"ball","r":1.0}]}"#;
        assert!(serde_json::from_str::<Partition>(s).is_err());
        let s = r#"{"d":1,"cells":[{"kind":"remainder","extra":1}]}"#;
        assert!(serde_json::from_str::<Partition>(s).is_err());
    }
}
