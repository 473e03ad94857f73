use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::path::{read_rows, write_header};
use super::{Excursion, HeightPath};
use crate::error::{Error, Result};
use crate::stochastic::ScalingParams;

/// How exploration time `s` relates to height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClockConvention {
    /// `s` equals height travelled (slope 1).
    HeightClock,
    /// Slope `±slope`.
    TreeClock { slope: f64 },
    /// Slope `2N` of the rescaled height process.
    PaperSde { scaling: Box<ScalingParams> },
}

impl ClockConvention {
    pub fn slope(&self) -> f64 {
        match self {
            ClockConvention::HeightClock => 1.0,
            ClockConvention::TreeClock { slope } => *slope,
            ClockConvention::PaperSde { scaling } => scaling.slope,
        }
    }

    pub fn paper_sde(scaling: &ScalingParams) -> Self {
        ClockConvention::PaperSde {
            scaling: Box::new(scaling.clone()),
        }
    }
}

/// Vertices `(s, h)` of the path under `clock`, starting at `(0, 0)`.
pub fn parametrize(path: &HeightPath, clock: &ClockConvention) -> Vec<(f64, f64)> {
    let p = clock.slope();
    let mut out = vec![(0.0, 0.0)];
    let mut s = 0.0;
    for seg in path.segments() {
        s += seg.length() / p;
        out.push((s, seg.to));
    }
    out
}

/// Rebuilds an untagged path from its vertices; inverse of [`parametrize`]
/// up to tags.
pub fn path_of_vertices(
    vertices: &[(f64, f64)],
    gamma: f64,
    clock: ClockConvention,
) -> Result<HeightPath> {
    if vertices.first() != Some(&(0.0, 0.0)) {
        return Err(Error::MalformedPath {
            index: 0,
            reason: "vertex list must start at (0, 0)".into(),
        });
    }
    let mut excursions = Vec::new();
    let mut cur = Excursion::default();
    for (i, &(_, h)) in vertices.iter().enumerate().skip(1) {
        if cur.maxima.len() == cur.minima.len() {
            cur.maxima.push(h);
        } else {
            cur.minima.push(h);
            if h == 0.0 {
                excursions.push(std::mem::take(&mut cur));
            }
        }
        if i + 1 == vertices.len() && !cur.is_empty() {
            return Err(Error::MalformedPath {
                index: i,
                reason: "path does not end at 0".into(),
            });
        }
    }
    HeightPath::new(excursions, gamma, clock)
}

impl HeightPath {
    /// CSV of `(s, h)` vertices under the path's own clock.
    pub fn write_vertex_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_header(&mut w, self)?;
        writeln!(w, "s,h")?;
        for (s, h) in parametrize(self, &self.clock) {
            writeln!(w, "{s},{h}")?;
        }
        Ok(())
    }

    pub fn read_vertex_csv<R: BufRead>(r: R) -> Result<Self> {
        let ((gamma, clock), rows) = read_rows(r)?;
        let mut rows = rows.into_iter();
        match rows.next() {
            Some((_, h)) if h == "s,h" => {}
            _ => return Err(Error::Parse { line: 0, reason: "missing `s,h` header".into() }),
        }
        let mut vertices = Vec::new();
        for (ln, row) in rows {
            let err = || Error::Parse { line: ln, reason: format!("bad row `{row}`") };
            let (s, h) = row.split_once(',').ok_or_else(err)?;
            vertices.push((s.parse().map_err(|_| err())?, h.parse().map_err(|_| err())?));
        }
        path_of_vertices(&vertices, gamma, clock)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exploration::path::tests::three_peak;
    use crate::stochastic::OffspringLaw;

    fn tent() -> HeightPath {
        HeightPath::new(
            vec![Excursion {
                maxima: vec![3.0],
                minima: vec![0.0],
                tags: vec![],
            }],
            10.0,
            ClockConvention::TreeClock { slope: 2.0 },
        )
        .unwrap()
    }

    #[test]
    fn tent_vertices() {
        let v = parametrize(&tent(), &ClockConvention::TreeClock { slope: 2.0 });
        assert_eq!(v, vec![(0.0, 0.0), (1.5, 3.0), (3.0, 0.0)]);
    }

    #[test]
    fn duration_is_variation_over_slope() {
        let p = three_peak();
        let v = parametrize(&p, &ClockConvention::TreeClock { slope: 4.0 });
        assert_eq!(v.last().unwrap().0, p.total_variation() / 4.0);
    }

    #[test]
    fn paper_sde_binary_recovers_tree_rates() {
        let s = ScalingParams::new(1, 1.0, 2f64.sqrt(), 0.0, 0.0, OffspringLaw::binary()).unwrap();
        let clock = ClockConvention::paper_sde(&s);
        assert_eq!(clock.slope(), 2.0);
        let (birth, death) = s.paper_sde_rates();
        assert!((birth - s.lambda_n).abs() < 1e-12 && (death - s.mu_n).abs() < 1e-12);
    }

    #[test]
    fn vertex_csv_roundtrip() {
        let mut p = three_peak();
        let mut buf = Vec::new();
        p.write_vertex_csv(&mut buf).unwrap();
        let back = HeightPath::read_vertex_csv(&buf[..]).unwrap();
        for e in &mut p.excursions {
            e.tags.clear();
        }
        assert_eq!(back, p);
        let t = tent();
        let mut buf = Vec::new();
        t.write_vertex_csv(&mut buf).unwrap();
        assert_eq!(HeightPath::read_vertex_csv(&buf[..]).unwrap(), t);
    }

    #[test]
    fn paper_sde_header_roundtrip() {
        let law = OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)]).unwrap();
        let s = ScalingParams::new(20, 1.0, 1.0, 0.5, 1.0, law).unwrap();
        let mut p = three_peak().with_clock(ClockConvention::paper_sde(&s));
        p.excursions[0].tags.clear();
        let mut buf = Vec::new();
        p.write_vertex_csv(&mut buf).unwrap();
        assert_eq!(HeightPath::read_vertex_csv(&buf[..]).unwrap(), p);
    }
}
