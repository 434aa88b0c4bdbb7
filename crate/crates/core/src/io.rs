//! Flat key-value configs and the CSV formats shared by the CLI.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::grid::{DiscreteTrajectory, RawPoint};
use crate::LocationId;

/// `key = value` lines; `#` starts a comment; blank lines are skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Config {
                    line: i + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Config {
                    line: i + 1,
                    msg: "empty key".into(),
                });
            }
            if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config {
                    line: i + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self
            .get(key)
            .ok_or_else(|| Error::Parse(format!("missing key `{key}`")))?;
        v.parse()
            .map_err(|_| Error::Parse(format!("bad value `{v}` for `{key}`")))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            Some(_) => self.parse(key),
            None => Ok(default),
        }
    }

    /// Comma- or whitespace-separated list. `a..b` and `a..=b` expand to
    /// integer ranges; `a..b:s` steps by `s`.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let bad = || Error::Parse(format!("bad list `{v}` for `{key}`"));
        let mut out = Vec::new();
        for item in v.split(|c: char| c == ',' || c.is_whitespace()) {
            if item.is_empty() {
                continue;
            }
            if let Some((lo, rest)) = item.split_once("..") {
                let (hi, step) = match rest.split_once(':') {
                    Some((h, s)) => (h, s.parse::<u64>().map_err(|_| bad())?),
                    None => (rest, 1),
                };
                let (hi, inclusive) = match hi.strip_prefix('=') {
                    Some(h) => (h, true),
                    None => (hi, false),
                };
                let lo: u64 = lo.parse().map_err(|_| bad())?;
                let hi: u64 = hi.parse().map_err(|_| bad())?;
                let end = if inclusive { hi + 1 } else { hi };
                if step == 0 {
                    return Err(bad());
                }
                for x in (lo..end).step_by(step as usize) {
                    out.push(x.to_string().parse().map_err(|_| bad())?);
                }
            } else {
                out.push(item.parse().map_err(|_| bad())?);
            }
        }
        Ok(Some(out))
    }
}

/// Parses a timestamp column value in the given format.
fn parse_timestamp(s: &str, epoch: bool) -> Result<i64> {
    let bad = || Error::Parse(format!("bad timestamp `{s}`"));
    if epoch {
        return s
            .parse::<i64>()
            .or_else(|_| s.parse::<f64>().map(|f| f.floor() as i64))
            .map_err(|_| bad());
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y/%m/%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(bad())
}

/// Reads `object_id,lat,lon,timestamp`. Whether timestamps are epoch
/// seconds or ISO-8601 is decided once from the first data row.
pub fn read_raw_points<R: Read>(reader: R) -> Result<Vec<RawPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["object_id", "lat", "lon", "timestamp"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse(format!(
            "raw header must be `{}`",
            expected.join(",")
        )));
    }
    let mut epoch: Option<bool> = None;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let ts = &rec[3];
        let is_epoch = *epoch.get_or_insert_with(|| ts.parse::<f64>().is_ok());
        let p = RawPoint {
            object_id: rec[0].to_string(),
            lat: rec[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad lat `{}`", &rec[1])))?,
            lon: rec[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad lon `{}`", &rec[2])))?,
            timestamp: parse_timestamp(ts, is_epoch)?,
        };
        if !p.is_valid() {
            return Err(Error::Parse(format!(
                "coordinate out of range: {}, {}",
                p.lat, p.lon
            )));
        }
        out.push(p);
    }
    Ok(out)
}

/// Writes `object_id,day_id,m0,m1,...`; unknown moments are left empty.
pub fn write_discrete<W: Write>(writer: W, ts: &[DiscreteTrajectory]) -> Result<()> {
    let n = ts.iter().map(|t| t.n_moments()).max().unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["object_id".to_string(), "day_id".to_string()];
    header.extend((0..n).map(|m| format!("m{m}")));
    wtr.write_record(&header)?;
    for t in ts {
        let mut row = vec![t.object_id.clone(), t.day_id.to_string()];
        row.extend(
            t.cells
                .iter()
                .map(|c| c.map(|l| l.to_string()).unwrap_or_default()),
        );
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_discrete<R: Read>(reader: R) -> Result<Vec<DiscreteTrajectory>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "object_id" || &headers[1] != "day_id" {
        return Err(Error::Parse(
            "discrete header must start with `object_id,day_id`".into(),
        ));
    }
    for (i, h) in headers.iter().skip(2).enumerate() {
        if h != format!("m{i}") {
            return Err(Error::Parse(format!("column {} should be `m{i}`", i + 2)));
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let day_id = rec[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad day_id `{}`", &rec[1])))?;
        let cells = rec
            .iter()
            .skip(2)
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<LocationId>()
                        .map(Some)
                        .map_err(|_| Error::Parse(format!("bad location `{c}`")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(DiscreteTrajectory {
            object_id: rec[0].to_string(),
            day_id,
            cells,
        });
    }
    Ok(out)
}

pub fn read_discrete_file(path: &Path) -> Result<Vec<DiscreteTrajectory>> {
    read_discrete(std::fs::File::open(path)?)
}

pub fn write_discrete_file(path: &Path, ts: &[DiscreteTrajectory]) -> Result<()> {
    write_discrete(std::fs::File::create(path)?, ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn key_values_with_comments_and_lists() {
        let kv = KeyValues::from_text(
            "# grid\nn_rows = 30\nname: bench # trailing\nstarts = 0..30:10, 45\nends = 5..=7\n",
        )
        .unwrap();
        assert_eq!(kv.parse::<u32>("n_rows").unwrap(), 30);
        assert_eq!(kv.get("name"), Some("bench"));
        assert_eq!(kv.list::<u32>("starts").unwrap().unwrap(), vec![0, 10, 20, 45]);
        assert_eq!(kv.list::<u32>("ends").unwrap().unwrap(), vec![5, 6, 7]);
        assert!(kv.list::<u32>("missing").unwrap().is_none());
        assert!(kv.parse::<u32>("missing").is_err());
    }

    #[test]
    fn key_values_reject_garbage() {
        assert!(KeyValues::from_text("no separator here").is_err());
        assert!(KeyValues::from_text("a = 1\na = 2").is_err());
    }

    #[test]
    fn raw_points_epoch_and_iso() {
        let epoch = "object_id,lat,lon,timestamp\ncar,30.6,104.0,1407049200\n";
        let iso = "object_id,lat,lon,timestamp\ncar,30.6,104.0,2014-08-03T07:00:00\n";
        let a = read_raw_points(epoch.as_bytes()).unwrap();
        let b = read_raw_points(iso.as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].timestamp, 1_407_049_200);
        let rfc = "object_id,lat,lon,timestamp\ncar,30.6,104.0,2014-08-03T08:00:00+01:00\n";
        assert_eq!(read_raw_points(rfc.as_bytes()).unwrap(), a);
    }

    #[test]
    fn raw_points_reject_bad_rows() {
        assert!(read_raw_points("id,lat,lon,ts\n".as_bytes()).is_err());
        let bad = "object_id,lat,lon,timestamp\ncar,95.0,104.0,0\n";
        assert!(read_raw_points(bad.as_bytes()).is_err());
    }

    #[test]
    fn discrete_header_is_exact() {
        let ts = vec![DiscreteTrajectory::complete("c1", 2, vec![1, 1, 2])];
        let mut buf = Vec::new();
        write_discrete(&mut buf, &ts).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "object_id,day_id,m0,m1,m2\nc1,2,1,1,2\n"
        );
    }

    proptest! {
        #[test]
        fn discrete_round_trip(
            rows in prop::collection::vec(
                ("[a-z]{1,6}", -5i64..20_000, prop::collection::vec(prop::option::of(0u32..900), 6)),
                0..8,
            )
        ) {
            let ts: Vec<_> = rows
                .into_iter()
                .map(|(o, d, cells)| DiscreteTrajectory { object_id: o, day_id: d, cells })
                .collect();
            let mut buf = Vec::new();
            write_discrete(&mut buf, &ts).unwrap();
            let back = read_discrete(buf.as_slice()).unwrap();
            prop_assert_eq!(back, ts);
        }
    }
}
