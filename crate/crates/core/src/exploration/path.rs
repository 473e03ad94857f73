use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ClockConvention;
use crate::error::{Error, Result};

/// Why the path turned upward at a local minimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MinimumTag {
    /// First visit to a birth event of `batch` children.
    NewBirthEvent { batch: u32 },
    /// Return to a pending event level to explore the next sibling.
    SiblingRevisit,
    /// Back at 0: the current tree is fully explored.
    ExcursionEnd,
}

impl fmt::Display for MinimumTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MinimumTag::NewBirthEvent { batch } => write!(f, "new_birth_event:{batch}"),
            MinimumTag::SiblingRevisit => f.write_str("sibling_revisit"),
            MinimumTag::ExcursionEnd => f.write_str("excursion_end"),
        }
    }
}

impl FromStr for MinimumTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sibling_revisit" => Ok(MinimumTag::SiblingRevisit),
            "excursion_end" => Ok(MinimumTag::ExcursionEnd),
            _ => s
                .strip_prefix("new_birth_event:")
                .and_then(|b| b.parse().ok())
                .filter(|&b| b >= 1)
                .map(|batch| MinimumTag::NewBirthEvent { batch })
                .ok_or_else(|| format!("unknown tag `{s}`")),
        }
    }
}

/// One tree: `0 -> M_1 -> m_1 -> M_2 -> ... -> M_K -> m_K = 0`. `tags` is
/// either empty (untagged) or parallel to `minima`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub maxima: Vec<f64>,
    pub minima: Vec<f64>,
    pub tags: Vec<MinimumTag>,
}

impl Excursion {
    pub fn len(&self) -> usize {
        self.maxima.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maxima.is_empty()
    }

    pub fn is_tagged(&self) -> bool {
        !self.tags.is_empty()
    }

    /// Pairs `(M_l, m_l)`.
    pub fn extrema(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.maxima.iter().copied().zip(self.minima.iter().copied())
    }
}

/// A monotone piece of the path, from height `from` to height `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
}

impl Segment {
    pub fn is_climb(&self) -> bool {
        self.to > self.from
    }

    pub fn length(&self) -> f64 {
        (self.to - self.from).abs()
    }

    pub fn low(&self) -> f64 {
        self.from.min(self.to)
    }

    pub fn high(&self) -> f64 {
        self.from.max(self.to)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightPath {
    pub excursions: Vec<Excursion>,
    #[serde(with = "crate::stochastic::horizon_serde")]
    pub gamma: f64,
    pub clock: ClockConvention,
}

impl HeightPath {
    pub fn new(excursions: Vec<Excursion>, gamma: f64, clock: ClockConvention) -> Result<Self> {
        let path = Self {
            excursions,
            gamma,
            clock,
        };
        path.validate()?;
        Ok(path)
    }

    pub fn with_clock(mut self, clock: ClockConvention) -> Self {
        self.clock = clock;
        self
    }

    pub fn num_maxima(&self) -> usize {
        self.excursions.iter().map(Excursion::len).sum()
    }

    pub fn max_height(&self) -> f64 {
        self.excursions
            .iter()
            .flat_map(|e| e.maxima.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Sum of `|dh|` over all segments.
    pub fn total_variation(&self) -> f64 {
        self.segments().map(|s| s.length()).sum()
    }

    pub fn is_tagged(&self) -> bool {
        self.excursions.iter().all(Excursion::is_tagged)
    }

    /// Monotone pieces in exploration order.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.excursions.iter().flat_map(|e| {
            let mut prev = 0.0;
            e.extrema().flat_map(move |(big, small)| {
                let up = Segment { from: prev, to: big };
                prev = small;
                [up, Segment { from: big, to: small }]
            })
        })
    }

    /// Flat index of the first extremum of excursion `e`.
    pub fn offset_of(&self, e: usize) -> usize {
        self.excursions[..e].iter().map(|x| 2 * x.len()).sum()
    }

    /// Checks alternation, bounds and, when tagged, the sibling bookkeeping.
    /// Errors carry the flat extremum index (`2l` for `M_l`, `2l+1` for `m_l`).
    pub fn validate(&self) -> Result<()> {
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(Error::param("gamma", "must be > 0"));
        }
        let mut offset = 0;
        for exc in &self.excursions {
            let bad = |i: usize, reason: String| Error::MalformedPath {
                index: offset + i,
                reason,
            };
            let k = exc.len();
            if k == 0 {
                return Err(bad(0, "empty excursion".into()));
            }
            if exc.minima.len() != k {
                return Err(bad(2 * k.min(exc.minima.len()), "maxima and minima differ in count".into()));
            }
            if exc.is_tagged() && exc.tags.len() != k {
                return Err(bad(1, "tags must be absent or one per minimum".into()));
            }
            let mut prev = 0.0;
            for (l, (big, small)) in exc.extrema().enumerate() {
                if !(big.is_finite() && big > prev && big <= self.gamma) {
                    return Err(bad(2 * l, format!("maximum {big} must exceed {prev} and stay <= gamma")));
                }
                let last = l + 1 == k;
                let ok = if last { small == 0.0 } else { small > 0.0 && small < big };
                if !ok {
                    return Err(bad(
                        2 * l + 1,
                        format!("minimum {small} invalid (only the last minimum is 0)"),
                    ));
                }
                prev = small;
            }
            if exc.is_tagged() {
                check_tags(exc).map_err(|(i, reason)| bad(i, reason))?;
            }
            offset += 2 * k;
        }
        Ok(())
    }

    /// CSV of extrema with columns `index,kind,level,tag`; header comments
    /// carry the horizon and clock.
    pub fn write_extrema_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_header(&mut w, self)?;
        writeln!(w, "index,kind,level,tag")?;
        let mut i = 0;
        for exc in &self.excursions {
            for (l, (big, small)) in exc.extrema().enumerate() {
                writeln!(w, "{i},M,{big},")?;
                match exc.tags.get(l) {
                    Some(tag) => writeln!(w, "{},m,{small},{tag}", i + 1)?,
                    None => writeln!(w, "{},m,{small},", i + 1)?,
                }
                i += 2;
            }
        }
        Ok(())
    }

    pub fn read_extrema_csv<R: BufRead>(r: R) -> Result<Self> {
        let (header, rows) = read_rows(r)?;
        let mut rows = rows.into_iter();
        match rows.next() {
            Some((_, h)) if h == "index,kind,level,tag" => {}
            Some((ln, h)) => return Err(Error::Parse { line: ln, reason: format!("bad header `{h}`") }),
            None => return Err(Error::Parse { line: 0, reason: "missing header".into() }),
        }
        let mut excursions = Vec::new();
        let mut cur = Excursion::default();
        let mut expect_max = true;
        let mut tagged = None;
        for (ln, row) in rows {
            let err = |reason: String| Error::Parse { line: ln, reason };
            let cols: Vec<&str> = row.split(',').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, got {}", cols.len())));
            }
            let level: f64 = cols[2].parse().map_err(|_| err(format!("bad level `{}`", cols[2])))?;
            match (cols[1], expect_max) {
                ("M", true) => cur.maxima.push(level),
                ("m", false) => {
                    cur.minima.push(level);
                    let has_tag = !cols[3].is_empty();
                    if *tagged.get_or_insert(has_tag) != has_tag {
                        return Err(err("mixed tagged and untagged minima".into()));
                    }
                    if has_tag {
                        cur.tags.push(cols[3].parse().map_err(err)?);
                    }
                    if level == 0.0 {
                        excursions.push(std::mem::take(&mut cur));
                    }
                }
                (kind, _) => return Err(err(format!("unexpected kind `{kind}`"))),
            }
            expect_max = !expect_max;
        }
        if !cur.is_empty() {
            return Err(Error::Parse { line: 0, reason: "path does not end at 0".into() });
        }
        HeightPath::new(excursions, header.0, header.1)
    }
}

/// Replays the tag stream against a stack of pending sibling groups.
fn check_tags(exc: &Excursion) -> std::result::Result<(), (usize, String)> {
    let mut stack: Vec<(f64, u32)> = Vec::new();
    for (l, (&m, tag)) in exc.minima.iter().zip(&exc.tags).enumerate() {
        let i = 2 * l + 1;
        let floor = stack.last().map_or(0.0, |s| s.0);
        match *tag {
            MinimumTag::NewBirthEvent { batch } => {
                if batch == 0 {
                    return Err((i, "batch size 0".into()));
                }
                if m <= floor {
                    return Err((i, format!("new event at {m} not above pending level {floor}")));
                }
                if batch > 1 {
                    stack.push((m, batch - 1));
                }
            }
            MinimumTag::SiblingRevisit => match stack.last_mut() {
                Some(top) if top.0 == m => {
                    top.1 -= 1;
                    if top.1 == 0 {
                        stack.pop();
                    }
                }
                _ => return Err((i, format!("revisit at {m} does not match a pending event"))),
            },
            MinimumTag::ExcursionEnd => {
                if m != 0.0 || l + 1 != exc.len() {
                    return Err((i, "excursion end must be the final minimum, at 0".into()));
                }
                if let Some(top) = stack.last() {
                    return Err((i, format!("{} siblings still pending at {}", top.1, top.0)));
                }
            }
        }
        if l + 1 == exc.len() && *tag != MinimumTag::ExcursionEnd {
            return Err((i, "final minimum must be tagged excursion_end".into()));
        }
    }
    Ok(())
}

pub(super) fn write_header<W: Write>(w: &mut W, path: &HeightPath) -> std::io::Result<()> {
    if path.gamma.is_finite() {
        writeln!(w, "# gamma: {}", path.gamma)?;
    } else {
        writeln!(w, "# gamma: inf")?;
    }
    writeln!(w, "# clock: {}", serde_json::to_string(&path.clock).map_err(std::io::Error::other)?)
}

type Header = (f64, ClockConvention);

/// Splits a CSV into its `# gamma` / `# clock` header and numbered data rows.
pub(super) fn read_rows<R: BufRead>(r: R) -> Result<(Header, Vec<(usize, String)>)> {
    let mut gamma = None;
    let mut clock = ClockConvention::HeightClock;
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let ln = i + 1;
        let line = line.map_err(|e| Error::Parse { line: ln, reason: e.to_string() })?;
        let line = line.trim();
        if let Some(v) = line.strip_prefix("# gamma:") {
            gamma = Some(
                crate::stochastic::horizon_serde::parse(v.trim())
                    .map_err(|reason| Error::Parse { line: ln, reason })?,
            );
        } else if let Some(v) = line.strip_prefix("# clock:") {
            clock = serde_json::from_str(v.trim())
                .map_err(|e| Error::Parse { line: ln, reason: e.to_string() })?;
        } else if !line.is_empty() && !line.starts_with('#') {
            rows.push((ln, line.to_string()));
        }
    }
    let gamma = gamma.ok_or(Error::Parse { line: 0, reason: "missing `# gamma:` header".into() })?;
    Ok(((gamma, clock), rows))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn three_peak() -> HeightPath {
        HeightPath::new(
            vec![Excursion {
                maxima: vec![3.0, 3.0, 1.5],
                minima: vec![1.0, 1.0, 0.0],
                tags: vec![
                    MinimumTag::NewBirthEvent { batch: 2 },
                    MinimumTag::SiblingRevisit,
                    MinimumTag::ExcursionEnd,
                ],
            }],
            f64::INFINITY,
            ClockConvention::TreeClock { slope: 2.0 },
        )
        .unwrap()
    }

    #[test]
    fn segments_and_summaries() {
        let p = three_peak();
        let segs: Vec<(f64, f64)> = p.segments().map(|s| (s.from, s.to)).collect();
        assert_eq!(
            segs,
            vec![(0.0, 3.0), (3.0, 1.0), (1.0, 3.0), (3.0, 1.0), (1.0, 1.5), (1.5, 0.0)]
        );
        assert_eq!(p.total_variation(), 11.0);
        assert_eq!(p.max_height(), 3.0);
        assert_eq!(p.num_maxima(), 3);
    }

    #[test]
    fn validation_names_index() {
        let mut p = three_peak();
        p.excursions[0].tags[1] = MinimumTag::ExcursionEnd;
        match p.validate() {
            Err(Error::MalformedPath { index, .. }) => assert_eq!(index, 3),
            other => panic!("{other:?}"),
        }
        let mut p = three_peak();
        p.excursions[0].minima[1] = 3.5;
        match p.validate() {
            Err(Error::MalformedPath { index, .. }) => assert_eq!(index, 3),
            other => panic!("{other:?}"),
        }
        let mut p = three_peak();
        p.gamma = 2.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn extrema_csv_roundtrip() {
        let p = three_peak();
        let mut buf = Vec::new();
        p.write_extrema_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("1,m,1,new_birth_event:2"));
        assert_eq!(HeightPath::read_extrema_csv(&buf[..]).unwrap(), p);
    }

    #[test]
    fn tag_strings() {
        for t in [
            MinimumTag::NewBirthEvent { batch: 3 },
            MinimumTag::SiblingRevisit,
            MinimumTag::ExcursionEnd,
        ] {
            assert_eq!(t.to_string().parse::<MinimumTag>().unwrap(), t);
        }
        assert!("new_birth_event:0".parse::<MinimumTag>().is_err());
    }
}
